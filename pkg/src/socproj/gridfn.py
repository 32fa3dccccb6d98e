"""Uniform time grids, piecewise-constant step functions, norms and quadrature.

The control space is the set of functions that are constant on each interval
[t_n, t_{n+1}) of a uniform partition of [0, T] (the last interval is closed
at T).  Two realizations of the projection onto that space live here:

* ``nodal_sample`` -- left-endpoint sampling, which is what the production
  iteration uses (the discrete update only ever reads left-node values);
* ``l2_project`` -- exact interval averages via Gauss-Legendre quadrature,
  kept as a test oracle to quantify the gap left by nodal sampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

# Scalar function of time, e.g. a drift coefficient or an exact control.
TimeFn = Callable[[float], float]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition 0 = t_0 < t_1 < ... < t_N = T with step dt = T/N."""

    T: float
    N: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.T <= 0.0:
            raise ValueError(f"horizon must be positive, got T={self.T}")
        if self.N < 1:
            raise ValueError(f"need at least one step, got N={self.N}")
        nodes = np.linspace(0.0, self.T, self.N + 1)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def dt(self) -> float:
        return self.T / self.N


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Piecewise-constant function on a TimeGrid, one coefficient per interval.

    ``values[n]`` is the value on [t_n, t_{n+1}); the final interval is closed
    at T so the function is defined on all of [0, T].
    """

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.N,):
            raise ValueError(
                f"expected {self.grid.N} interval values, got shape {values.shape}"
            )
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __call__(self, t):
        """Evaluate at scalar or array t in [0, T]."""
        idx = np.searchsorted(self.grid.nodes, t, side="right") - 1
        idx = np.clip(idx, 0, self.grid.N - 1)
        return self.values[idx]

    def __add__(self, other: "StepFunction") -> "StepFunction":
        _require_same_grid(self, other)
        return StepFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "StepFunction") -> "StepFunction":
        _require_same_grid(self, other)
        return StepFunction(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "StepFunction":
        return StepFunction(self.grid, self.values * c)

    __rmul__ = __mul__


def _require_same_grid(u: StepFunction, v: StepFunction) -> None:
    if u.grid != v.grid:
        raise ValueError("step functions live on different grids")


@lru_cache(maxsize=None)
def _gauss_legendre(q: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(q)
    return x, w


def nodal_sample(f: TimeFn, grid: TimeGrid) -> StepFunction:
    """Step function taking the left-endpoint value f(t_n) on each interval."""
    values = np.array([float(f(t)) for t in grid.nodes[:-1]])
    return StepFunction(grid, values)


def l2_project(f: TimeFn, grid: TimeGrid, q: int = 5) -> StepFunction:
    """Interval averages of f computed with q-point Gauss-Legendre per interval."""
    if q < 2:
        raise ValueError(f"quadrature order must be >= 2, got {q}")
    x, w = _gauss_legendre(q)
    half = 0.5 * grid.dt
    values = np.empty(grid.N)
    for n in range(grid.N):
        mid = grid.nodes[n] + half
        fx = np.array([float(f(mid + half * xi)) for xi in x])
        values[n] = 0.5 * float(w @ fx)
    return StepFunction(grid, values)


def linf_dist(u: StepFunction, v: StepFunction) -> float:
    """max_n |u_n - v_n| over the shared grid."""
    _require_same_grid(u, v)
    return float(np.max(np.abs(u.values - v.values)))


def l2_dist(u: StepFunction, v: StepFunction) -> float:
    """L2([0,T]) distance of two step functions, sqrt(dt * sum (u_n - v_n)^2)."""
    _require_same_grid(u, v)
    d = u.values - v.values
    return float(np.sqrt(u.grid.dt * np.dot(d, d)))


def l2_dist_to_function(u: StepFunction, f: TimeFn, q: int = 5) -> float:
    """L2([0,T]) distance between a step function and a smooth function.

    Computed per interval with q-point Gauss-Legendre, so it is exact whenever
    (f - u)^2 is a polynomial of degree <= 2q-1 on each interval.
    """
    if q < 3:
        raise ValueError(f"quadrature order must be >= 3, got {q}")
    x, w = _gauss_legendre(q)
    grid = u.grid
    half = 0.5 * grid.dt
    acc = 0.0
    for n in range(grid.N):
        mid = grid.nodes[n] + half
        fx = np.array([float(f(mid + half * xi)) for xi in x])
        acc += half * float(w @ (fx - u.values[n]) ** 2)
    return float(np.sqrt(acc))


def trapezoid(values: np.ndarray, grid: TimeGrid) -> float:
    """Trapezoidal rule dt*(x_0/2 + x_1 + ... + x_{N-1} + x_N/2) on nodal data."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.N + 1,):
        raise ValueError(
            f"expected {grid.N + 1} nodal values, got shape {values.shape}"
        )
    inner = float(values[1:-1].sum()) if grid.N > 1 else 0.0
    return grid.dt * (0.5 * values[0] + inner + 0.5 * values[-1])


def zero_control(grid: TimeGrid) -> StepFunction:
    """The zero step function, the default initial control."""
    return StepFunction(grid, np.zeros(grid.N))


def constant_control(grid: TimeGrid, c: float) -> StepFunction:
    return StepFunction(grid, np.full(grid.N, float(c)))
