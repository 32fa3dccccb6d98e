"""Brownian ensemble and Euler simulation tests."""

import math

import numpy as np
import pytest

from socproj.gridfn import StepFunction, TimeGrid, constant_control, nodal_sample, zero_control
from socproj.paths import (
    SimulationError,
    derive_seed,
    dump_paths,
    euler_simulate,
    gen_brownian,
    mean_state_integral,
)
from socproj.problems import (
    CostDerivatives,
    Diffusion,
    ExactSolution,
    LinearDrift,
    ProblemSpec,
    example2,
)


def _deterministic_problem(b_y=0.0, b_u=1.0, m=0.0, sigma=0.0, y0=0.0):
    return ProblemSpec(
        name="toy",
        drift=LinearDrift(
            b_y=lambda t: b_y,
            b_u=lambda t: b_u,
            m=lambda t: m,
            lip_bound=abs(b_y) + abs(b_u) + 1.0,
            lower_bound=max(abs(b_u), 1e-6),
        ),
        diffusion=Diffusion(
            sigma=lambda y, u, _s=sigma: np.full_like(y, _s),
            sigma_y=lambda y, u: np.zeros_like(y),
            sigma_u=lambda y, u: np.zeros_like(y),
            bound=0.0,
        ),
        costs=CostDerivatives(
            h_y=lambda t, y: np.zeros_like(y),
            j_u=lambda u: u,
            g=lambda y: np.zeros_like(y),
        ),
        y0=y0,
        T=1.0,
        delta=1e9,
        exact=ExactSolution(u_star=lambda t: 0.0, mu_star=0.0),
    )


class TestGenBrownian:
    def test_same_seed_reproduces_bitwise(self):
        grid = TimeGrid(1.0, 8)
        a = gen_brownian(42, 100, grid)
        b = gen_brownian(42, 100, grid)
        np.testing.assert_array_equal(a.increments, b.increments)

    def test_different_seeds_differ(self):
        grid = TimeGrid(1.0, 8)
        a = gen_brownian(1, 50, grid)
        b = gen_brownian(2, 50, grid)
        assert not np.array_equal(a.increments, b.increments)

    def test_per_path_substreams_independent_of_path_count(self):
        grid = TimeGrid(1.0, 6)
        small = gen_brownian(9, 5, grid, normalize=False)
        large = gen_brownian(9, 50, grid, normalize=False)
        np.testing.assert_array_equal(small.increments, large.increments[:5])

    def test_per_step_variance_window_raw(self):
        grid = TimeGrid(1.0, 10)  # dt = 0.1, window is dt*(1 +/- 5%)
        bw = gen_brownian(7, 10_000, grid, normalize=False)
        var = bw.increments.var(axis=0)
        assert np.all((var >= 0.095) & (var <= 0.105))

    def test_normalized_moments_exact(self):
        grid = TimeGrid(1.0, 10)
        bw = gen_brownian(7, 2000, grid)
        assert bw.normalized
        np.testing.assert_allclose(bw.increments.mean(axis=0), 0.0, atol=1e-16)
        np.testing.assert_allclose(
            np.mean(bw.increments**2, axis=0), grid.dt, rtol=1e-13
        )

    def test_overall_mean_bound(self):
        grid = TimeGrid(1.0, 10)
        bw = gen_brownian(123, 10_000, grid, normalize=False)
        bound = 4.0 * math.sqrt(grid.dt / bw.increments.size)
        assert abs(bw.increments.mean()) <= bound

    def test_standard_normal_moment_test(self):
        grid = TimeGrid(1.0, 10)
        z = gen_brownian(3, 10_000, grid, normalize=False).increments / math.sqrt(
            grid.dt
        )
        z = z.ravel()
        skew = float(np.mean(z**3))
        kurt = float(np.mean(z**4))
        assert abs(skew) <= 0.05
        assert abs(kurt - 3.0) <= 0.1

    def test_single_path_skips_normalization(self):
        grid = TimeGrid(1.0, 4)
        bw = gen_brownian(5, 1, grid)
        assert not bw.normalized
        assert np.any(bw.increments != 0.0)

    def test_argument_validation(self):
        with pytest.raises(ValueError):
            gen_brownian(1, 0, TimeGrid(1.0, 4))
        with pytest.raises(ValueError):
            gen_brownian(-1, 4, TimeGrid(1.0, 4))


class TestDeriveSeed:
    def test_deterministic_and_distinct(self):
        seeds = [derive_seed(1234, k) for k in range(16)]
        assert seeds == [derive_seed(1234, k) for k in range(16)]
        assert len(set(seeds)) == 16
        assert all(0 <= s < 2**63 for s in seeds)


class TestEulerSimulate:
    def test_frozen_dynamics(self):
        prob = _deterministic_problem(b_u=0.0, y0=7.0)
        grid = TimeGrid(1.0, 5)
        paths = euler_simulate(prob, zero_control(grid), gen_brownian(1, 3, grid))
        np.testing.assert_array_equal(paths.states, np.full((3, 6), 7.0))

    def test_deterministic_ramp(self):
        prob = _deterministic_problem()
        grid = TimeGrid(1.0, 4)
        paths = euler_simulate(
            prob, constant_control(grid, 1.0), gen_brownian(1, 2, grid)
        )
        np.testing.assert_allclose(paths.states[0], [0.0, 0.25, 0.5, 0.75, 1.0])

    def test_grid_mismatch(self):
        prob = _deterministic_problem()
        with pytest.raises(ValueError):
            euler_simulate(
                prob, zero_control(TimeGrid(1.0, 4)), gen_brownian(1, 2, TimeGrid(1.0, 8))
            )

    def test_nonfinite_state_raises(self):
        prob = _deterministic_problem(m=float("nan"))
        grid = TimeGrid(1.0, 4)
        with pytest.raises(SimulationError):
            euler_simulate(prob, zero_control(grid), gen_brownian(1, 2, grid))

    def test_exact_control_reproduces_constraint_level(self):
        # with normalized increments the mean path is deterministic, so the
        # integral misses the reported level only by the O(dt) Euler bias
        prob = example2(alpha=0.1)
        grid = TimeGrid(1.0, 256)
        u = nodal_sample(prob.exact.u_star, grid)
        bw = gen_brownian(31, 4000, grid)
        integral = mean_state_integral(euler_simulate(prob, u, bw))
        assert abs(integral - prob.delta) <= 0.5 * grid.dt

    def test_exact_control_within_three_standard_errors_raw(self):
        prob = example2(alpha=0.1)
        grid = TimeGrid(1.0, 256)
        u = nodal_sample(prob.exact.u_star, grid)
        bw = gen_brownian(31, 4000, grid, normalize=False)
        paths = euler_simulate(prob, u, bw)
        per_path = np.array(
            [
                grid.dt * (0.5 * row[0] + row[1:-1].sum() + 0.5 * row[-1])
                for row in paths.states
            ]
        )
        se = per_path.std() / math.sqrt(paths.L)
        assert abs(per_path.mean() - prob.delta) <= 3.0 * se + 0.5 * grid.dt


class TestCommonRandomNumbers:
    def test_mean_difference_recursion_exact_for_state_free_sigma(self):
        # identical noise arrays cancel in the cross-path mean difference up
        # to float roundoff when sigma has no state dependence
        prob = _deterministic_problem(b_y=0.4, sigma=0.5)
        grid = TimeGrid(1.0, 8)
        bw = gen_brownian(77, 500, grid)
        rng = np.random.default_rng(0)
        u = StepFunction(grid, rng.normal(size=8))
        v = StepFunction(grid, rng.normal(size=8))
        mu = euler_simulate(prob, u, bw).states.mean(axis=0)
        mv = euler_simulate(prob, v, bw).states.mean(axis=0)
        diff = mu - mv
        for n in range(8):
            predicted = (1.0 + 0.4 * grid.dt) * diff[n] + (
                u.values[n] - v.values[n]
            ) * grid.dt
            assert diff[n + 1] == pytest.approx(predicted, abs=1e-12)

    def test_weak_euler_error_first_order(self):
        # mean path error for example2 halves when dt halves (normalized
        # increments make the sample mean deterministic, isolating the bias)
        prob = example2(alpha=0.1)

        def mean_bias(n):
            grid = TimeGrid(1.0, n)
            u = nodal_sample(prob.exact.u_star, grid)
            bw = gen_brownian(5, 2000, grid)
            integral = mean_state_integral(euler_simulate(prob, u, bw))
            return abs(integral - 0.16542657786208414)  # exact continuous value

        b64, b128 = mean_bias(64), mean_bias(128)
        assert 1.6 <= b64 / b128 <= 2.4


class TestMeanStateIntegral:
    def test_constant_ensemble(self):
        grid = TimeGrid(1.0, 4)
        prob = _deterministic_problem(b_u=0.0, y0=3.0)
        paths = euler_simulate(prob, zero_control(grid), gen_brownian(1, 10, grid))
        assert mean_state_integral(paths) == pytest.approx(3.0)

    def test_ramp_ensemble(self):
        prob = _deterministic_problem()
        grid = TimeGrid(1.0, 4)
        paths = euler_simulate(
            prob, constant_control(grid, 1.0), gen_brownian(1, 2, grid)
        )
        assert mean_state_integral(paths) == pytest.approx(0.5)

    def test_two_path_hand_value(self):
        from socproj.paths import PathEnsemble

        grid = TimeGrid(1.0, 2)
        paths = PathEnsemble(grid=grid, states=np.array([[0.0, 0.0, 0.0], [0.0, 2.0, 4.0]]))
        assert mean_state_integral(paths) == pytest.approx(1.0)


def test_dump_paths(tmp_path):
    prob = _deterministic_problem()
    grid = TimeGrid(1.0, 3)
    paths = euler_simulate(prob, constant_control(grid, 1.0), gen_brownian(1, 4, grid))
    out = tmp_path / "paths.tsv"
    dump_paths(paths, str(out))
    loaded = np.loadtxt(out, delimiter="\t")
    np.testing.assert_allclose(loaded, paths.states)
