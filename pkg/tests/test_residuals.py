import numpy as np
import pytest
from helpers import kkt_state, stationary_problem
from hypothesis import given
from hypothesis import strategies as st

from dotsoc.grid import GridSpec
from dotsoc.operators import Operators
from dotsoc.problems import make_example
from dotsoc.residuals import constraint_value, discrete_l2, full_report, kkt_dot, kkt_soc
from dotsoc.solvers import SolverState


def test_discrete_l2_examples():
    grid = GridSpec((2, 2))
    assert discrete_l2(np.ones((3, 3)), grid) == pytest.approx(np.sqrt(9 * 0.25))
    assert discrete_l2([np.ones(2), np.full(2, 2.0)]) == pytest.approx(np.sqrt(10))
    assert discrete_l2(np.array([3.0, 4.0]), cell_volume=4.0) == pytest.approx(10.0)
    assert discrete_l2(np.zeros(5)) == 0.0


@given(st.floats(-1e3, 1e3).filter(lambda a: a == 0 or abs(a) > 1e-100), st.integers(0, 1000))
def test_discrete_l2_homogeneous(a, seed):
    x = np.random.default_rng(seed).standard_normal(7)
    assert np.isclose(discrete_l2(a * x, cell_volume=0.3), abs(a) * discrete_l2(x, cell_volume=0.3),
                      rtol=1e-13, atol=1e-300)


def test_zero_state_cone_residual():
    prob, _ = make_example("ex1", 0.0, (4, 8, 8))
    ops = Operators.for_problem(prob)
    state = SolverState.zeros(prob, 1.0)
    state.z = np.zeros_like(state.z)
    _, eta_P, _, _ = kkt_soc(state, prob, ops)
    nd = discrete_l2(ops.offset(), cell_volume=prob.grid.cell_volume)
    assert eta_P == pytest.approx(nd / (1 + nd), rel=1e-14)


def test_zero_state_dual_residual():
    prob, _ = make_example("ex1", 0.0, (4, 8, 8))
    state = SolverState.zeros(prob, 1.0)
    eD, eP, epj, eS, edot, obj = kkt_dot(state, prob)
    nc = discrete_l2(prob.c, prob.grid)
    assert eP == pytest.approx(nc / (1 + nc), rel=1e-14)
    assert eD == 0 and epj == 0 and eS == 0 and obj == 0 and edot == eP


@pytest.mark.parametrize("n", [(2, 3), (4, 6, 5), (3, 4, 4)])
def test_exact_solution_has_zero_residuals(n):
    prob, rho = stationary_problem(n)
    rep = full_report(kkt_state(prob, rho), prob)
    assert rep.eta_dot <= 1e-12
    assert rep.eta_soc <= 1e-12


def test_projection_residual_vanishes_when_feasible():
    prob, rho = stationary_problem((3, 4, 4))
    ops = Operators.for_problem(prob)
    state = kkt_state(prob, rho)
    blocks = prob.grid.split(state.q)
    blocks[0][...] = -1.0
    state.q = prob.grid.join(blocks)
    # f(q) < 0 and alpha_1 > 0 would violate complementarity, so zero alpha_1 here
    ab = prob.grid.split(state.alpha)
    ab[0][...] = 0.0
    state.alpha = prob.grid.join(ab)
    assert np.all(constraint_value(ops, state.q) < 0)
    assert kkt_dot(state, prob, ops)[2] == 0.0


def test_dual_potential_shift_invariance():
    prob, _ = make_example("ex2", 0.1, (4, 8, 8))
    state = SolverState.zeros(prob, 1.0)
    rng = np.random.default_rng(5)
    state.phi = rng.standard_normal(state.phi.shape)
    state.q = rng.standard_normal(state.q.shape)
    state.alpha = rng.standard_normal(state.alpha.shape)
    a = kkt_dot(state, prob)
    state.phi = state.phi + 3.7
    b = kkt_dot(state, prob)
    assert np.allclose(a[:5], b[:5], rtol=1e-12, atol=1e-15)
    # the costs have zero total, so the objective is shift invariant too
    assert b[5] == pytest.approx(a[5], abs=1e-12)
