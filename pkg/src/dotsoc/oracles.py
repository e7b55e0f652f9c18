"""Brute-force reference implementations used to validate the fast paths.

Nothing here is on the solve path.  Dense matrices are built by probing the
stencil operators with basis vectors, the parabola projection is computed by
root finding on a scalar equation, and the translating Gaussian provides an
analytic transport solution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import grid as g
from .cone import in_cone
from .problems import DensitySpec, rasterize_density

MAX_DENSE_ENTRIES = 10_000

DENSE_TAGS = ("A", "A*", "F", "B", "BF", "F*B*BF", "L_TL_X*")


@dataclass(frozen=True)
class DenseOperator:
    matrix: np.ndarray
    tag: str
    grid: g.GridSpec

    def __matmul__(self, x):
        return self.matrix @ x


def _space_block_sizes(grid: g.GridSpec) -> list:
    return [int(np.prod(grid.staggered_shape(d))) for d in range(1, grid.ndim)]


def _split_space(grid: g.GridSpec, x: np.ndarray) -> list:
    out, off = [], 0
    for d, size in enumerate(_space_block_sizes(grid), start=1):
        out.append(x[off:off + size].reshape(grid.staggered_shape(d)))
        off += size
    return out


def _operator(tag: str, grid: g.GridSpec):
    """``(apply, n_in)`` for a tag; ``apply`` maps a flat vector to a flat vector."""
    n_c = int(np.prod(grid.centered_shape))
    n_s = grid.staggered_size
    n_g0 = int(np.prod(grid.cone_shape))
    n_dec = (4 * grid.D + 1) * n_g0
    if tag == "A":
        return lambda x: g.gradient(grid, x.reshape(grid.centered_shape)), n_c
    if tag == "A*":
        return lambda x: g.gradient_adjoint(grid, x).ravel(), n_s
    if tag == "F":
        return lambda x: g.decouple(grid, x).ravel(), n_s
    if tag == "B":
        return (lambda x: g.lift(grid, x.reshape((4 * grid.D + 1,) + grid.cone_shape)).ravel(),
                n_dec)
    if tag == "BF":
        return lambda x: g.embed(grid, x).ravel(), n_s
    if tag == "F*B*BF":
        return lambda x: g.embed_adjoint(grid, g.embed(grid, x)), n_s
    if tag == "L_TL_X*":
        n_sp = sum(_space_block_sizes(grid))
        return lambda x: g.avg_time_spaceadj(grid, _split_space(grid, x)).ravel(), n_sp
    raise ValueError(f"unknown operator tag {tag!r}; expected one of {DENSE_TAGS}")


def densify(tag: str, grid) -> DenseOperator:
    """Explicit matrix of a stencil operator, one column per basis vector."""
    if not isinstance(grid, g.GridSpec):
        grid = g.GridSpec(tuple(grid))
    apply, n_in = _operator(tag, grid)
    n_out = apply(np.zeros(n_in)).size
    if max(n_in, n_out) > MAX_DENSE_ENTRIES:
        raise ValueError(f"grid {grid.n} too large to densify ({max(n_in, n_out)} > "
                         f"{MAX_DENSE_ENTRIES} entries)")
    mat = np.empty((n_out, n_in))
    e = np.zeros(n_in)
    for j in range(n_in):
        e[j] = 1.0
        mat[:, j] = apply(e)
        e[j] = 0.0
    return DenseOperator(mat, tag, grid)


# ---------------------------------------------------------------------------
# projection onto the parabolic set {x_0 + |x_bar|^2 / 8 <= 0}
# ---------------------------------------------------------------------------

def parabola_value(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[0] + 0.125 * np.sum(x[1:] ** 2, axis=0)


def _psi(lam, x0, s):
    # constraint value at the stationary point for multiplier lam
    return x0 - lam + s / (8.0 * (1.0 + 0.25 * lam) ** 2)


def _solve_multiplier(x0: np.ndarray, s: np.ndarray, iters: int = 200) -> np.ndarray:
    """Root of the decreasing function ``psi`` on ``[0, x0 + s/8]`` (safeguarded Newton)."""
    lo = np.zeros_like(x0)
    hi = np.maximum(x0 + s / 8.0, 0.0)
    lam = 0.5 * (lo + hi)
    for _ in range(iters):
        val = _psi(lam, x0, s)
        lo = np.where(val > 0, lam, lo)
        hi = np.where(val <= 0, lam, hi)
        dval = -1.0 - s / (16.0 * (1.0 + 0.25 * lam) ** 3)
        newton = lam - val / dval
        ok = (newton >= lo) & (newton <= hi)
        lam_new = np.where(ok, newton, 0.5 * (lo + hi))
        if np.all(np.abs(lam_new - lam) <= 1e-15 * (1.0 + np.abs(lam))):
            lam = lam_new
            break
        lam = lam_new
    return lam


def project_parabola_field(x: np.ndarray) -> tuple:
    """Vectorized projection; axis 0 holds ``(x_0, x_1, ..., x_m)``.

    Returns ``(projection, multiplier)``.  Stationarity of
    ``|y - x|^2 / 2 + lam (y_0 + |y_bar|^2 / 8)`` gives ``y_0 = x_0 - lam`` and
    ``y_bar = x_bar / (1 + lam / 4)``; ``lam`` solves a cubic, found here by
    bracketing and Newton steps.
    """
    x = np.asarray(x, dtype=float)
    x0 = x[0]
    s = np.sum(x[1:] ** 2, axis=0)
    feasible = x0 + 0.125 * s <= 0
    lam = np.where(feasible, 0.0, _solve_multiplier(np.where(feasible, 0.0, x0), s))
    y = np.empty_like(x)
    y[0] = x0 - lam
    y[1:] = x[1:] / (1.0 + 0.25 * lam)
    y = np.where(feasible, x, y)
    return y, lam


def project_parabola_point(x) -> np.ndarray:
    y, _ = project_parabola_field(np.asarray(x, dtype=float).reshape(-1, 1))
    return y[:, 0]


def parabola_kkt_residual(x, y, lam) -> float:
    """``|x - y - lam grad g(y)|`` for ``g(y) = y_0 + |y_bar|^2 / 8``."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    grad = np.concatenate([[1.0], 0.25 * y[1:]])
    return float(np.linalg.norm(x - y - lam * grad))


def lift_point(x) -> np.ndarray:
    """``B x + d`` for one decoupled tuple ``x = (x_0; x_1..x_m)``."""
    x = np.asarray(x, dtype=float)
    return np.concatenate([[1.0 - x[0]], g.SQRT_HALF * x[1:], [1.0 + x[0]]])


def cone_vs_parabola_consistency(x, tol: float = 1e-14) -> bool:
    """Parabola feasibility of ``x`` agrees with cone membership of ``Bx + d``.

    ``tol`` widens both predicates by the same relative slack, which is
    needed only for points lying on the common boundary (rounding in the
    lift moves them by a few ulps).  ``tol=0`` compares the raw predicates.
    """
    x = np.asarray(x, dtype=float)
    val = parabola_value(x)
    par = val <= tol * (1.0 + abs(x[0]))
    lifted = lift_point(x)
    cone = bool(in_cone(lifted, rtol=tol))
    if tol == 0.0:
        return bool(par) == cone
    # on the boundary both may flip; accept if either predicate is within slack
    near = abs(val) <= tol * (1.0 + abs(x[0]) + float(np.sum(x[1:] ** 2)))
    return bool(par) == cone or near


# ---------------------------------------------------------------------------
# analytic translating Gaussian
# ---------------------------------------------------------------------------

def analytic_gaussian(t: float, grid, chi: float, mu1: float, mu2: float) -> np.ndarray:
    """Normalized Gaussian centred at ``((1-t) mu1 + t mu2, (1-t) mu2 + t mu1)``."""
    if not isinstance(grid, g.GridSpec):
        grid = g.GridSpec(tuple(grid))
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    m1 = (1 - t) * mu1 + t * mu2
    m2 = (1 - t) * mu2 + t * mu1
    spec = DensitySpec("gaussian-sum", {"centers": [[m1, m2]], "chi": chi})
    return rasterize_density(spec, grid)
