"""Shared constructions for the unit tests."""

import numpy as np

from dotsoc.grid import GridSpec
from dotsoc.problems import DensitySpec, Problem
from dotsoc.solvers import SolverState


def stationary_problem(n=(4, 6, 5), seed=0):
    """Identical endpoints, so the optimal flow is the constant one."""
    grid = GridSpec(tuple(n))
    rho = np.random.default_rng(seed).uniform(0.5, 2.0, grid.spatial_shape)
    spec = DensitySpec("uniform")
    from dotsoc.problems import build_cost_vector

    return Problem(grid, build_cost_vector(rho, rho, grid), spec, spec), rho


def kkt_state(problem, rho, sigma=1.0):
    """Exact primal-dual solution for identical endpoints ``rho``."""
    grid = problem.grid
    state = SolverState.zeros(problem, sigma)
    a1 = grid.h[0] * rho / (rho.sum() * grid.h_space)
    blocks = grid.split(state.alpha)
    blocks[0][...] = a1
    state.alpha = grid.join(blocks)
    state.beta[0] = 0.5 * a1
    state.beta[-1] = -0.5 * a1
    return state
