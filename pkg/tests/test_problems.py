import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dotsoc.grid import GridSpec
from dotsoc.problems import (DensitySpec, Problem, build_cost_vector, build_weights,
                             deposit_diracs, endpoint_rasters, example_specs, make_example,
                             obstacle_mask, rasterize_density)
from dotsoc.rawio import read_raw, subsample_to, write_raw


def test_uniform_density():
    grid = GridSpec((2, 2, 2))
    r = rasterize_density(DensitySpec("uniform", delta=0.1), grid)
    assert r.shape == (3, 3)
    assert np.allclose(r, 1 / 9 + 0.1, atol=1e-15)


def test_gaussian_peak_and_mass():
    grid = GridSpec((4, 32, 32))
    r0, r1, _ = example_specs("ex1", 0.0)
    a = rasterize_density(r0, grid)
    b = rasterize_density(r1, grid)
    assert np.unravel_index(a.argmax(), a.shape) == (8, 24)
    assert np.unravel_index(b.argmax(), b.shape) == (24, 8)
    assert np.isclose(a.sum(), 1.0, atol=1e-14)
    shifted = rasterize_density(r0.with_delta(0.1), grid)
    assert np.isclose(shifted.sum(), 1.0 + 0.1 * 33 * 33, rtol=1e-14)


@given(st.sampled_from(["ex1", "ex2", "ex3", "ex4", "ex5", "ex6"]),
       st.sampled_from([0.0, 0.05, 0.1]))
def test_example_densities_are_normalized(ex, delta):
    grid = GridSpec((2, 16, 16))
    r0, r1, _ = example_specs(ex, delta)
    for spec in (r0, r1):
        r = rasterize_density(spec, grid)
        assert np.all(r >= delta)
        assert np.isclose(r.sum(), 1.0 + delta * r.size, rtol=1e-13)


def test_dirac_deposition_and_tie_break():
    grid = GridSpec((2, 4, 4))
    r = deposit_diracs([[0.125, 0.5], [0.9, 0.0]], grid)
    # 0.125 is halfway between nodes 0 and 1 and goes to the lower one
    assert r[0, 2] == 0.5 and r[4, 0] == 0.5
    assert r.sum() == 1.0
    with pytest.raises(ValueError):
        deposit_diracs([[1.2, 0.5]], grid)
    with pytest.raises(ValueError):
        DensitySpec("dirac-points", {"points": []})


def test_cost_vector_hand_example():
    grid = GridSpec((1, 1))
    c = build_cost_vector(np.array([1.0, 3.0]), np.array([2.0, 2.0]), grid)
    assert np.allclose(c, [[0.25, 0.75], [-0.5, -0.5]], atol=1e-15)
    grid = GridSpec((3, 4))
    rho = np.arange(1.0, 6.0)
    c = build_cost_vector(rho, rho[::-1], grid)
    assert np.all(c[1:-1] == 0)
    assert np.isclose(c[0].sum() * grid.h_space, 1) and np.isclose(c[-1].sum() * grid.h_space, -1)


def test_cost_vector_rejects_bad_input():
    grid = GridSpec((2, 2))
    with pytest.raises(ValueError):
        build_cost_vector(np.zeros(3), np.ones(3), grid)
    with pytest.raises(ValueError):
        build_cost_vector(np.array([1.0, -1.0, 1.0]), np.ones(3), grid)
    with pytest.raises(ValueError):
        build_cost_vector(np.ones(4), np.ones(3), grid)


def test_weights():
    mask = np.array([[True, False], [False, False]])
    w = build_weights(mask, 1e-6)
    assert set(np.unique(w)) == {1e-6, 1.0} and w[0, 0] == 1e-6
    with pytest.raises(ValueError):
        build_weights(mask, 0.0)


def test_example_determinism_and_point_count():
    p1, _ = make_example("ex7", 0.0, (4, 16, 16), seed=3)
    p2, _ = make_example("ex7", 0.0, (4, 16, 16), seed=3)
    p3, _ = make_example("ex7", 0.0, (4, 16, 16), seed=4)
    assert np.array_equal(p1.c, p2.c) and not np.array_equal(p1.c, p3.c)
    _, (_, r1) = make_example("ex7", 0.0, (4, 16, 16))
    assert len(r1.params["points"]) == 30


def test_examples_reject_bad_input():
    with pytest.raises(ValueError):
        make_example("ex9", 0.0, (2, 4, 4))
    with pytest.raises(ValueError):
        make_example("ex1", 0.0, (2, 4, 4, 4))
    with pytest.raises(ValueError):
        DensitySpec("uniform", delta=-1.0)
    with pytest.raises(ValueError):
        DensitySpec("nope")


def test_obstacle_example_weights_and_masses():
    prob, _ = make_example("ex6", 0.05, (4, 32, 32))
    mask = obstacle_mask(example_specs("ex6")[2], prob.grid)
    assert mask.shape == prob.grid.cone_shape
    assert np.all(prob.omega[mask] == 1e-6) and np.all(prob.omega[~mask] == 1.0)
    # no mass inside the obstacle, delta elsewhere
    r0, r1 = prob.densities()
    assert np.all(r0[mask[0]] == 0) and np.all(r1[mask[0]] == 0)
    assert np.all(r0[~mask[0]] > 0)


def test_on_grid_rebuilds_same_problem():
    prob, _ = make_example("ex6", 0.0, (4, 16, 16))
    fine = prob.on_grid(GridSpec((4, 16, 16)))
    assert np.array_equal(fine.c, prob.c) and np.array_equal(fine.omega, prob.omega)
    with pytest.raises(ValueError):
        Problem(prob.grid, prob.c).on_grid(prob.grid)


def test_raster_round_trip(tmp_path):
    grid = GridSpec((2, 8, 8))
    vals = np.random.default_rng(1).uniform(0, 1, (17, 17))
    path = write_raw(tmp_path / "r.raw", vals)
    assert np.array_equal(read_raw(path), vals)
    assert np.array_equal(subsample_to(vals, (9, 9)), vals[::2, ::2])
    r = rasterize_density(DensitySpec("raster-file", {"path": str(path)}), grid)
    assert np.allclose(r, vals[::2, ::2] / vals[::2, ::2].sum())
    raw = rasterize_density(DensitySpec("raster-file", {"path": str(path), "as_is": True}, 0.5),
                            grid)
    assert np.array_equal(raw, vals[::2, ::2] + 0.5)
    with pytest.raises(ValueError):
        subsample_to(vals, (8, 8))


def test_raster_mask_region(tmp_path):
    grid = GridSpec((2, 4, 4))
    w = np.ones((5, 5))
    w[2, 1:4] = 1e-6
    path = write_raw(tmp_path / "w.raw", w)
    spec = DensitySpec("uniform", delta=0.1)
    r0, r1, omega = endpoint_rasters(grid, spec, spec, [{"type": "raster-file", "path": str(path)}])
    assert np.all(r0[2, 1:4] == 0) and np.all(r1[2, 1:4] == 0)
    assert np.all(omega[:, 2, 1:4] == 1e-6) 
    assert np.isclose(omega.sum(), omega.size - 3 * grid.n[0] * (1 - 1e-6))
    r0_, _, none = endpoint_rasters(grid, spec, spec)
    assert none is None and np.all(r0_ > 0)
