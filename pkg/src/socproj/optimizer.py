"""The fully discrete gradient projection iteration.

Each iteration, on one fixed Brownian ensemble:

1. simulate the state under the current control u;
2. solve the multiplier-free adjoint by backward LSMC;
3. assemble the cost gradient and take the half step u_half = u - rho_i * grad;
4. re-simulate under u_half and integrate the mean state (I_hat, trapezoid);
5. compute the multiplier mu = max(I_hat - delta, 0) / (rho_i * I_tilde),
   where I_tilde integrates the forward response kernel;
6. update u = u_half - rho_i * mu * psi_n * b_u(t_n) per interval;
7. stop when the sup-norm control change falls below eps0.

Because the kernels psi and varphi_tilde depend only on the drift
coefficients, they are computed once before the loop.  The multiplier step
makes the freshly updated control's mean-state integral equal
min(I_hat, delta) on the shared ensemble; with per-step-normalized increments
this restoration is exact in floating point whenever sigma_y = 0.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .detode import solve_kernels
from .gridfn import StepFunction, linf_dist
from .lsmc import BasisSpec, BsdeSolution, solve_bsde_hat
from .paths import (
    PathEnsemble,
    derive_seed,
    euler_simulate,
    gen_brownian,
    mean_state_integral,
)
from .problems import ProblemSpec, VectorProblem

RHO_CONSTANT = "constant"
RHO_HARMONIC = "harmonic"


@dataclass(frozen=True)
class SolveConfig:
    """Knobs of one solve: step size and schedule, stopping, sampling, basis."""

    rho: float
    eps0: float
    L: int
    basis: BasisSpec
    seed: int
    rho_schedule: str = RHO_CONSTANT
    max_iters: int = 500
    normalize_increments: bool = True

    def __post_init__(self) -> None:
        if self.rho <= 0.0:
            raise ValueError("rho must be positive")
        if self.eps0 <= 0.0:
            raise ValueError("eps0 must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if self.rho_schedule not in (RHO_CONSTANT, RHO_HARMONIC):
            raise ValueError(f"unknown rho schedule {self.rho_schedule!r}")

    def rho_at(self, i: int) -> float:
        """Step size of iteration i (1-based)."""
        return self.rho if self.rho_schedule == RHO_CONSTANT else self.rho / i


@dataclass(frozen=True, eq=False)
class IterationState:
    """Snapshot of one iteration: the updated control and its scalars."""

    i: int
    u: StepFunction
    mu: float
    I_hat: float
    I_tilde: float
    error: float


@dataclass(frozen=True, eq=False)
class SolveResult:
    u_final: StepFunction
    mu_final: float
    iterations: int
    history: list[IterationState]
    converged: bool
    wall_time: float


def gradient(
    control: StepFunction,
    paths: PathEnsemble,
    adj: BsdeSolution,
    problem: ProblemSpec,
) -> StepFunction:
    """Monte Carlo cost gradient, one value per control interval:

    grad_n = mean_l[ P_hat_n(y_l) b_u(t_n) + Q_hat_n(y_l) sigma_u(y_l, u_n) ]
             + j_u(u_n).
    """
    grid = control.grid
    if paths.grid != grid or adj.grid != grid:
        raise ValueError("control, paths and adjoint must share one grid")
    drift, diff, costs = problem.drift, problem.diffusion, problem.costs
    mean_p = adj.p_hat[:, : grid.N].mean(axis=0)
    vals = np.empty(grid.N)
    for n in range(grid.N):
        tn = float(grid.nodes[n])
        un = float(control.values[n])
        q_term = float(np.mean(adj.q_hat[:, n] * diff.sigma_u(paths.states[:, n], un)))
        vals[n] = mean_p[n] * float(drift.b_u(tn)) + q_term + costs.j_u(un)
    return StepFunction(grid, vals)


def compute_multiplier(I_hat: float, delta: float, I_tilde: float, rho_i: float) -> float:
    """Explicit multiplier max(I_hat - delta, 0) / (rho_i * I_tilde)."""
    if rho_i <= 0.0:
        raise ValueError("rho_i must be positive")
    if I_tilde <= 0.0:
        raise ValueError(
            "response-kernel integral is nonpositive; b_u vanishes on the grid"
        )
    return max(I_hat - delta, 0.0) / (rho_i * I_tilde)


def project_update(
    u_half: StepFunction,
    mu: float,
    psi: np.ndarray,
    b_u,
    rho_i: float,
) -> StepFunction:
    """Projection step u_n = u_half_n - rho_i * mu * psi_n * b_u(t_n)."""
    grid = u_half.grid
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (grid.N + 1,):
        raise ValueError("psi must carry one value per grid node")
    bu = np.array([float(b_u(t)) for t in grid.nodes[:-1]])
    return StepFunction(grid, u_half.values - rho_i * mu * psi[:-1] * bu)


def solve(problem: ProblemSpec, config: SolveConfig, u0: StepFunction) -> SolveResult:
    """Run the projection iteration from u0 until the sup-norm step change
    falls below eps0 or max_iters is reached (reported, not raised)."""
    grid = u0.grid
    start = time.perf_counter()
    bw = gen_brownian(config.seed, config.L, grid, normalize=config.normalize_increments)
    kern = solve_kernels(grid, problem.drift.b_y, problem.drift.b_u)
    I_tilde = kern.i_tilde

    u = u0
    mu = 0.0
    history: list[IterationState] = []
    converged = False
    iterations = 0
    for i in range(1, config.max_iters + 1):
        iterations = i
        rho_i = config.rho_at(i)
        ens = euler_simulate(problem, u, bw)
        adj = solve_bsde_hat(ens, bw, problem, u, config.basis)
        grad = gradient(u, ens, adj, problem)
        u_half = StepFunction(grid, u.values - rho_i * grad.values)
        ens_half = euler_simulate(problem, u_half, bw)
        I_hat = mean_state_integral(ens_half)
        mu = compute_multiplier(I_hat, problem.delta, I_tilde, rho_i)
        u_new = project_update(u_half, mu, kern.psi, problem.drift.b_u, rho_i)
        error = linf_dist(u_new, u)
        history.append(
            IterationState(i=i, u=u_new, mu=mu, I_hat=I_hat, I_tilde=I_tilde, error=error)
        )
        u = u_new
        if error <= config.eps0:
            converged = True
            break

    return SolveResult(
        u_final=u,
        mu_final=mu,
        iterations=iterations,
        history=history,
        converged=converged,
        wall_time=time.perf_counter() - start,
    )


def solve_vector(
    vp: VectorProblem, config: SolveConfig, u0: StepFunction
) -> list[SolveResult]:
    """Solve each decoupled component independently; component k gets the
    child seed derive_seed(config.seed, k)."""
    results = []
    for k, comp in enumerate(vp.components):
        comp_config = SolveConfig(
            rho=config.rho,
            eps0=config.eps0,
            L=config.L,
            basis=config.basis,
            seed=derive_seed(config.seed, k),
            rho_schedule=config.rho_schedule,
            max_iters=config.max_iters,
            normalize_increments=config.normalize_increments,
        )
        results.append(solve(comp, comp_config, u0))
    return results
