"""Coarse-to-fine warm starts on dyadically refined grids."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .cone import project_cone_field
from .grid import GridSpec, embed
from .operators import Operators
from .problems import Problem
from .solvers import Solution, SolverConfig, SolverState, run


@dataclass(frozen=True)
class LevelSchedule:
    """Levels ordered coarse to fine; ``levels[-1]`` is the target grid."""

    depth: int
    grids: tuple
    tols: tuple


def build_schedule(grid: GridSpec, V: int, tol: float, min_tol: float = 1e-6) -> LevelSchedule:
    """Grids ``n / 2^v`` for ``v = V..0`` with tolerances ``max(tol 10^-v, min_tol)`` (``tol`` on the finest)."""
    if V < 0:
        raise ValueError("depth must be nonnegative")
    f = 2 ** V
    if any(n % f for n in grid.n):
        raise ValueError(f"grid {grid.n} is not divisible by 2^{V}")
    if any(n // f < 2 for n in grid.n):
        raise ValueError(f"grid {grid.n} is too coarse for depth {V}")
    grids, tols = [], []
    for v in range(V, -1, -1):
        grids.append(GridSpec(tuple(n // 2 ** v for n in grid.n)))
        tols.append(tol if v == 0 else max(tol * 10.0 ** (-v), min_tol))
    return LevelSchedule(V, tuple(grids), tuple(tols))


# ---------------------------------------------------------------------------
# prolongation
# ---------------------------------------------------------------------------

def _interp_axis(v: np.ndarray, axis: int, staggered: bool) -> np.ndarray:
    """Linear interpolation to the doubled grid along one axis.

    Positions are physical: node ``i`` sits at ``i h`` (centered) or
    ``(i + 1/2) h`` (staggered).  Fine points beyond the outermost coarse
    points are extrapolated linearly so linear data is reproduced exactly.
    """
    m = v.shape[axis]
    if staggered:
        nf = 2 * m
        u = np.arange(nf) / 2.0 - 0.25
    else:
        nf = 2 * (m - 1) + 1
        u = np.arange(nf) / 2.0
    if m == 1:
        return np.repeat(v, nf, axis=axis)
    lo = np.clip(np.floor(u).astype(int), 0, m - 2)
    w = u - lo
    shape = [1] * v.ndim
    shape[axis] = nf
    w = w.reshape(shape)
    return (1.0 - w) * np.take(v, lo, axis=axis) + w * np.take(v, lo + 1, axis=axis)


def prolong_array(v: np.ndarray, staggered_axes: tuple = ()) -> np.ndarray:
    """Separable linear prolongation of a node array; ``staggered_axes`` are half-shifted."""
    out = np.asarray(v, dtype=float)
    for ax in range(out.ndim):
        out = _interp_axis(out, ax, ax in staggered_axes)
    return out


def prolong_staggered(x: np.ndarray, coarse: GridSpec, fine: GridSpec) -> np.ndarray:
    return fine.join([prolong_array(b, (d,)) for d, b in enumerate(coarse.split(x))])


def prolong_cone(w: np.ndarray) -> np.ndarray:
    return np.stack([prolong_array(b, (0,)) for b in w])


def _check_dyadic(coarse: GridSpec, fine: GridSpec) -> None:
    if fine.n != tuple(2 * n for n in coarse.n):
        raise ValueError(f"grid {fine.n} is not the dyadic refinement of {coarse.n}")


def prolong_state(state: SolverState, coarse: GridSpec, fine: GridSpec,
                  fine_problem: Problem | None = None) -> SolverState:
    """Warm start on ``fine`` from a coarse iterate.

    ``phi`` and ``q`` are interpolated directly.  The multipliers ``alpha``
    and ``beta`` carry a factor ``h_0`` (they are ``h_0`` times a density and
    momentum), so they are interpolated and then rescaled by
    ``h_0^fine / h_0^coarse``; ``sigma`` is kept.  ``beta``
    is projected onto the cone set and ``z`` is rebuilt from the fine ``q``.
    """
    _check_dyadic(coarse, fine)
    ratio = fine.h[0] / coarse.h[0]
    phi = prolong_array(state.phi)
    phi -= phi.mean()
    q = prolong_staggered(state.q, coarse, fine)
    alpha = ratio * prolong_staggered(state.alpha, coarse, fine)
    beta = project_cone_field(ratio * prolong_cone(state.beta))
    sigma = state.sigma
    scale = None
    if fine_problem is not None:
        scale = Operators.for_problem(fine_problem).scale
    y = embed(fine, q, scale) - beta / sigma
    y[0] += 1.0
    y[-1] += 1.0
    z = project_cone_field(y, out=y)
    return SolverState(phi, z, q, alpha, beta, sigma)


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def solve_multilevel(problem: Problem, cfg: SolverConfig,
                     initial_state: SolverState | None = None) -> Solution:
    """Run ``cfg`` on the level schedule of ``problem`` and return the finest solution.

    Coarse problems are rebuilt from the density specs of ``problem``.
    ``Solution.level_iters`` lists the iteration counts coarse to fine and
    ``Solution.history`` holds only the finest level.
    """
    depth = cfg.multilevel.depth
    if depth == 0:
        return run(problem, cfg, initial_state)
    sched = build_schedule(problem.grid, depth, cfg.tol, cfg.multilevel.min_tol)
    t0 = time.perf_counter()
    state = initial_state
    iters = []
    traces = []
    sol = None
    prev_grid = None
    for grid, tol in zip(sched.grids, sched.tols):
        prob = problem if grid == problem.grid else problem.on_grid(grid)
        if state is not None and prev_grid is not None:
            state = prolong_state(state, prev_grid, grid, prob)
        remaining = cfg.max_time - (time.perf_counter() - t0)
        level_cfg = SolverConfig(**{**cfg.__dict__, "max_time": max(remaining, 0.0)})
        sol = run(prob, level_cfg, state, tol=tol)
        iters.append(sol.iterations)
        traces.append(sol.sigma_trace)
        state = sol.state
        prev_grid = grid
        if sol.status == "aborted":
            break
        if grid != problem.grid and sol.status == "max_time":
            break
    sol.level_iters = iters
    sol.message = sol.message or f"levels {[g.n for g in sched.grids]}"
    sol.state.elapsed = time.perf_counter() - t0
    sol.level_sigma_traces = traces
    return sol
