"""Seeded Brownian increments and forward Euler simulation of the state.

Increments are drawn with counter-based Philox substreams, one per path, so
path lambda is filled from its own stream regardless of how many other paths
exist.  By default the ensemble is then moment-normalized per time step
(sample mean exactly 0, sample variance exactly dt across paths).  The
normalization is what makes the mean-state recursion, and with it the
multiplier's feasibility restoration, exact in floating point whenever the
diffusion does not depend on the state; it can be disabled per ensemble.

One ensemble is generated per solve and reused for every iteration, so
control perturbations propagate through identical noise (common random
numbers).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gridfn import StepFunction, TimeGrid, trapezoid
from .problems import ProblemSpec

# Philox counter blocks reserved per path substream; each block yields four
# 64-bit words, so this supports ~2e6 normals per path without overlap.
_PATH_STRIDE = 1 << 20

_MASK64 = (1 << 64) - 1


def derive_seed(base: int, key: int) -> int:
    """Deterministic 63-bit child seed via a splitmix64-style mix of (base, key)."""
    x = (base + (key + 1) * 0x9E3779B97F4A7C15) & _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x & ((1 << 63) - 1)


class SimulationError(RuntimeError):
    """A state path left the representable range (diffusion blow-up)."""


@dataclass(frozen=True, eq=False)
class BrownianEnsemble:
    """L seeded Brownian increment paths on a grid, shape (L, N)."""

    grid: TimeGrid
    seed: int
    increments: np.ndarray
    normalized: bool

    def __post_init__(self) -> None:
        if self.increments.shape[1] != self.grid.N:
            raise ValueError("increments do not match the grid")
        self.increments.setflags(write=False)

    @property
    def L(self) -> int:
        return self.increments.shape[0]


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """L Euler state trajectories on a grid, shape (L, N+1)."""

    grid: TimeGrid
    states: np.ndarray

    def __post_init__(self) -> None:
        if self.states.shape[1] != self.grid.N + 1:
            raise ValueError("states do not match the grid")
        self.states.setflags(write=False)

    @property
    def L(self) -> int:
        return self.states.shape[0]


def _substream_normals(seed: int, L: int, N: int) -> np.ndarray:
    out = np.empty((L, N))
    for lam in range(L):
        bg = np.random.Philox(key=seed)
        bg.advance(lam * _PATH_STRIDE)
        out[lam] = np.random.Generator(bg).standard_normal(N)
    return out


def gen_brownian(
    seed: int, L: int, grid: TimeGrid, normalize: bool = True
) -> BrownianEnsemble:
    """Generate L increment paths, deterministic given (seed, L, N).

    With ``normalize`` (the default) each step's column is shifted and scaled
    to sample mean 0 and sample variance dt exactly; requires L >= 2 and is
    skipped otherwise.
    """
    if L < 1:
        raise ValueError(f"path count must be >= 1, got {L}")
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    dw = _substream_normals(seed, L, grid.N) * np.sqrt(grid.dt)
    did_normalize = bool(normalize) and L >= 2
    if did_normalize:
        dw = dw - dw.mean(axis=0)
        scale = np.sqrt(np.mean(dw * dw, axis=0))
        if np.any(scale <= 0.0):
            raise SimulationError("degenerate increment column")
        dw = dw * (np.sqrt(grid.dt) / scale)
    return BrownianEnsemble(
        grid=grid, seed=seed, increments=dw, normalized=did_normalize
    )


def euler_simulate(
    problem: ProblemSpec, control: StepFunction, bw: BrownianEnsemble
) -> PathEnsemble:
    """Forward Euler of the controlled state, path-parallel over the ensemble.

    y_{n+1} = y_n + (b_y(t_n) y_n + b_u(t_n) u_n + m(t_n)) dt
              + sigma(y_n, u_n) dW_{n+1}
    """
    if control.grid != bw.grid:
        raise ValueError("control and increments live on different grids")
    grid = bw.grid
    dt = grid.dt
    drift, diff = problem.drift, problem.diffusion
    by = [float(drift.b_y(t)) for t in grid.nodes[:-1]]
    bu = [float(drift.b_u(t)) for t in grid.nodes[:-1]]
    m = [float(drift.m(t)) for t in grid.nodes[:-1]]

    states = np.empty((bw.L, grid.N + 1))
    states[:, 0] = problem.y0
    for n in range(grid.N):
        y = states[:, n]
        u = float(control.values[n])
        states[:, n + 1] = (
            y
            + (by[n] * y + bu[n] * u + m[n]) * dt
            + diff.sigma(y, u) * bw.increments[:, n]
        )
        if not np.all(np.isfinite(states[:, n + 1])):
            raise SimulationError(f"non-finite state at step {n + 1}")
    return PathEnsemble(grid=grid, states=states)


def mean_state_integral(paths: PathEnsemble) -> float:
    """Trapezoidal rule applied to the cross-path nodal means."""
    return trapezoid(paths.states.mean(axis=0), paths.grid)


def dump_paths(paths: PathEnsemble, fname: str, delimiter: str = "\t") -> None:
    """Write one row per path, nodes as columns (debugging aid)."""
    np.savetxt(fname, paths.states, delimiter=delimiter)
