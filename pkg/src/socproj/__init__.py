"""Gradient projection solver for stochastic optimal control problems whose
mean state must satisfy an expected integral constraint, with a least-squares
Monte Carlo adjoint solver and a convergence benchmark harness."""

from .bench import (
    RunReport,
    RunRow,
    SweepConfig,
    build_problem,
    fit_order,
    parse_config,
    rate,
    run_single,
    run_sweep,
)
from .detode import (
    KernelSolution,
    analytic_psi_constant,
    check_kernel_identity,
    solve_kernels,
    solve_psi,
    solve_varphi_tilde,
)
from .gridfn import (
    StepFunction,
    TimeGrid,
    constant_control,
    l2_dist,
    l2_dist_to_function,
    l2_project,
    linf_dist,
    nodal_sample,
    trapezoid,
    zero_control,
)
from .lsmc import (
    HYPERCUBE,
    VORONOI,
    BasisSpec,
    BsdeSolution,
    Partition,
    build_partition,
    regress,
    solve_bsde_full,
    solve_bsde_hat,
)
from .optimizer import (
    IterationState,
    SolveConfig,
    SolveResult,
    compute_multiplier,
    gradient,
    project_update,
    solve,
    solve_vector,
)
from .paths import (
    BrownianEnsemble,
    PathEnsemble,
    SimulationError,
    derive_seed,
    dump_paths,
    euler_simulate,
    gen_brownian,
    mean_state_integral,
)
from .problems import (
    EXAMPLE2_DELTA,
    EXAMPLE2_MU_STAR,
    EXAMPLE3_DELTA_ACTIVE,
    CostDerivatives,
    Diffusion,
    ExactSolution,
    LinearDrift,
    ProblemSpec,
    VectorProblem,
    example1,
    example2,
    example3,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
