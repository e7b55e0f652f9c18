import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dotsoc.cone import in_cone
from dotsoc.grid import GridSpec
from dotsoc.multilevel import (build_schedule, prolong_array, prolong_cone, prolong_staggered,
                               prolong_state, solve_multilevel)
from dotsoc.problems import make_example
from dotsoc.solvers import SolverConfig, SolverState, run


def test_schedule_example():
    s = build_schedule(GridSpec((32, 128, 128)), 2, 1e-4)
    assert [g.n for g in s.grids] == [(8, 32, 32), (16, 64, 64), (32, 128, 128)]
    assert s.tols == pytest.approx((1e-6, 1e-5, 1e-4))
    s = build_schedule(GridSpec((16, 16)), 3, 1e-4)
    assert s.tols == pytest.approx((1e-6, 1e-6, 1e-5, 1e-4))
    assert build_schedule(GridSpec((4, 4)), 0, 1e-3).grids == (GridSpec((4, 4)),)


@pytest.mark.parametrize("n, V", [((12, 16), 3), ((8, 8), 3), ((8, 8), -1)])
def test_schedule_rejects(n, V):
    with pytest.raises(ValueError):
        build_schedule(GridSpec(n), V, 1e-4)


def _coords(m, staggered):
    return np.arange(m) + (0.5 if staggered else 0.0)


@given(st.integers(2, 6), st.integers(2, 6), st.booleans(), st.booleans(),
       st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_prolongation_reproduces_affine_data(m0, m1, s0, s1, a, b, c):
    x0 = _coords(m0, s0)[:, None]
    x1 = _coords(m1, s1)[None, :]
    coarse = a + b * x0 + c * x1
    fine = prolong_array(coarse, tuple(ax for ax, s in enumerate((s0, s1)) if s))
    f0 = (_coords(fine.shape[0], s0) / 2)[:, None]
    f1 = (_coords(fine.shape[1], s1) / 2)[None, :]
    assert fine.shape == (2 * m0 if s0 else 2 * m0 - 1, 2 * m1 if s1 else 2 * m1 - 1)
    assert np.allclose(fine, a + b * f0 + c * f1, atol=1e-12)


def test_prolongation_shapes():
    coarse, fine = GridSpec((2, 4, 4)), GridSpec((4, 8, 8))
    x = np.ones(coarse.staggered_size)
    assert np.allclose(prolong_staggered(x, coarse, fine), 1.0)
    w = np.ones((9,) + coarse.cone_shape)
    assert prolong_cone(w).shape == (9,) + fine.cone_shape


def test_prolong_state_properties():
    cp_, _ = make_example("ex2", 0.0, (4, 8, 8))
    fp, _ = make_example("ex2", 0.0, (8, 16, 16))
    sol = run(cp_, SolverConfig(tol=1e-5))
    st_ = prolong_state(sol.state, cp_.grid, fp.grid, fp)
    assert st_.sigma == sol.state.sigma
    assert abs(st_.phi.mean()) < 1e-12
    assert np.all(in_cone(st_.beta, rtol=1e-12)) and np.all(in_cone(st_.z, rtol=1e-12))
    # alpha_1 carries h_0, so the fine slice mass halves with h_0
    a_c = cp_.grid.split(sol.state.alpha)[0].sum(axis=(1, 2)) * cp_.grid.h_space
    a_f = fp.grid.split(st_.alpha)[0].sum(axis=(1, 2)) * fp.grid.h_space
    assert np.allclose(a_f.mean() / a_c.mean(), 0.5, rtol=0.05)
    with pytest.raises(ValueError):
        prolong_state(sol.state, cp_.grid, GridSpec((8, 16, 32)))


def test_depth_zero_is_plain_run():
    prob, _ = make_example("ex1", 0.0, (4, 8, 8))
    a = solve_multilevel(prob, SolverConfig(tol=1e-5))
    b = run(prob, SolverConfig(tol=1e-5))
    assert a.iterations == b.iterations and np.array_equal(a.state.alpha, b.state.alpha)


def test_multilevel_saves_finest_iterations():
    prob, _ = make_example("ex1", 0.0, (16, 64, 64))
    cold = run(prob, SolverConfig(tol=1e-4))
    warm = solve_multilevel(prob, SolverConfig.from_dict({"tol": 1e-4, "multilevel": {"depth": 2}}))
    assert cold.converged and warm.converged
    assert len(warm.level_iters) == 3 and len(warm.level_sigma_traces) == 3
    assert warm.level_iters[-1] <= cold.iterations / 3
    assert warm.report.eta_dot <= 1e-4
