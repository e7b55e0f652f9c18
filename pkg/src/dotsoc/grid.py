"""Staggered space-time grids and the linear operators living on them.

Conventions
-----------
Axis 0 is time, axes 1..D are space.  A grid with segment counts
``n = (n_0, ..., n_D)`` has

* centered nodes ``G^c`` of shape ``(n_0+1, ..., n_D+1)``,
* staggered nodes ``G_d^s`` where the extent along axis ``d`` is ``n_d``
  (half index ``j - 1/2`` is stored at integer offset ``j - 1``).

Array containers:

* centered field  -- ndarray of shape ``grid.centered_shape``
* staggered field -- flat 1-D ndarray holding the D+1 blocks back to back;
  ``grid.split`` returns reshaped views of the blocks
* cone field      -- ndarray of shape ``(4D+2,) + grid.cone_shape`` where
  ``grid.cone_shape`` is the shape of ``G_0^s``

Every operator is a stencil sweep; nothing is assembled as a matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

SQRT_HALF = np.sqrt(0.5)
# Factor used by the adjoints.  It differs from SQRT_HALF by one ulp and is
# chosen so that SQRT_HALF * SQRT_HALF_ADJ == 0.5 exactly; the composed map
# F^* B^* B F then reproduces its analytic diagonal bit for bit.
SQRT_HALF_ADJ = 0.5 / SQRT_HALF


class ShapeError(ValueError):
    """Array shape does not match the grid it is used with."""


def _along(ndim: int, axis: int, sl: slice) -> tuple:
    idx = [slice(None)] * ndim
    idx[axis] = sl
    return tuple(idx)


@dataclass(frozen=True)
class GridSpec:
    """Uniform staggered partition of the unit space-time cube.

    ``n[0]`` is the number of time segments; ``n[1:]`` are the spatial ones.
    """

    n: tuple

    def __post_init__(self):
        n = tuple(int(v) for v in self.n)
        if len(n) < 2:
            raise ValueError("need one time axis and at least one spatial axis")
        if any(v < 1 for v in n):
            raise ValueError(f"segment counts must be positive, got {n}")
        object.__setattr__(self, "n", n)

    @property
    def D(self) -> int:
        return len(self.n) - 1

    @property
    def ndim(self) -> int:
        return len(self.n)

    @property
    def h(self) -> tuple:
        return tuple(1.0 / v for v in self.n)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def h_space(self) -> float:
        return float(np.prod(self.h[1:]))

    @property
    def centered_shape(self) -> tuple:
        return tuple(v + 1 for v in self.n)

    @property
    def spatial_shape(self) -> tuple:
        return tuple(v + 1 for v in self.n[1:])

    def staggered_shape(self, d: int) -> tuple:
        shape = list(self.centered_shape)
        shape[d] = self.n[d]
        return tuple(shape)

    @property
    def cone_shape(self) -> tuple:
        return self.staggered_shape(0)

    @property
    def n_cone_blocks(self) -> int:
        return 4 * self.D + 2

    @cached_property
    def _offsets(self) -> tuple:
        sizes = [int(np.prod(self.staggered_shape(d))) for d in range(self.ndim)]
        return tuple(np.concatenate([[0], np.cumsum(sizes)]).tolist())

    @property
    def staggered_size(self) -> int:
        return self._offsets[-1]

    def split(self, x: np.ndarray) -> list:
        """Views of the D+1 blocks of a flat staggered field."""
        if x.ndim != 1 or x.size != self.staggered_size:
            raise ShapeError(
                f"staggered field must be flat of length {self.staggered_size}, got {x.shape}"
            )
        off = self._offsets
        return [x[off[d]:off[d + 1]].reshape(self.staggered_shape(d)) for d in range(self.ndim)]

    def join(self, blocks: Sequence[np.ndarray]) -> np.ndarray:
        if len(blocks) != self.ndim:
            raise ShapeError(f"expected {self.ndim} blocks, got {len(blocks)}")
        for d, b in enumerate(blocks):
            if np.shape(b) != self.staggered_shape(d):
                raise ShapeError(f"block {d} has shape {np.shape(b)}, expected {self.staggered_shape(d)}")
        return np.concatenate([np.asarray(b, dtype=float).ravel() for b in blocks])

    def zeros_staggered(self) -> np.ndarray:
        return np.zeros(self.staggered_size)

    def zeros_centered(self) -> np.ndarray:
        return np.zeros(self.centered_shape)

    def zeros_cone(self) -> np.ndarray:
        return np.zeros((self.n_cone_blocks,) + self.cone_shape)

    def cone_offset(self) -> np.ndarray:
        """The constant ``d = (1; 0; ...; 0; 1)`` at every point of ``G_0^s``."""
        d = self.zeros_cone()
        d[0] = 1.0
        d[-1] = 1.0
        return d

    def coarsen(self, factor: int = 2) -> "GridSpec":
        if any(v % factor for v in self.n):
            raise ValueError(f"grid {self.n} is not divisible by {factor}")
        return GridSpec(tuple(v // factor for v in self.n))

    # -- shape checks ------------------------------------------------------

    def check_centered(self, phi: np.ndarray) -> None:
        if np.shape(phi) != self.centered_shape:
            raise ShapeError(f"centered field shape {np.shape(phi)} != {self.centered_shape}")

    def check_cone(self, w: np.ndarray) -> None:
        expected = (self.n_cone_blocks,) + self.cone_shape
        if np.shape(w) != expected:
            raise ShapeError(f"cone field shape {np.shape(w)} != {expected}")

    def check_spatial_blocks(self, s: Sequence[np.ndarray]) -> None:
        if len(s) != self.D:
            raise ShapeError(f"expected {self.D} spatial blocks, got {len(s)}")
        for d, b in enumerate(s, start=1):
            if np.shape(b) != self.staggered_shape(d):
                raise ShapeError(f"spatial block {d} has shape {np.shape(b)}")

    def check_g0s(self, a: np.ndarray) -> None:
        if np.shape(a) != self.cone_shape:
            raise ShapeError(f"array on G_0^s has shape {np.shape(a)} != {self.cone_shape}")


# ---------------------------------------------------------------------------
# gradient and its adjoint
# ---------------------------------------------------------------------------

def gradient(grid: GridSpec, phi: np.ndarray) -> np.ndarray:
    """Staggered forward differences of a centered field, one block per axis."""
    grid.check_centered(phi)
    out = np.empty(grid.staggered_size)
    for d, (blk, h) in enumerate(zip(grid.split(out), grid.h)):
        np.subtract(phi[_along(grid.ndim, d, slice(1, None))],
                    phi[_along(grid.ndim, d, slice(None, -1))], out=blk)
        blk *= 1.0 / h
    return out


def gradient_adjoint(grid: GridSpec, q: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`gradient` (minus the discrete divergence)."""
    out = np.zeros(grid.centered_shape)
    for d, (blk, h) in enumerate(zip(grid.split(q), grid.h)):
        s = blk * (1.0 / h)
        out[_along(grid.ndim, d, slice(1, None))] += s
        out[_along(grid.ndim, d, slice(None, -1))] -= s
    return out


# ---------------------------------------------------------------------------
# the four-shift decoupling F and the averaging pair L_T L_X^*
# ---------------------------------------------------------------------------

def _shift_slices(grid: GridSpec, d: int, v: int) -> tuple:
    """(destination on G_0^s, source on G_d^s) index tuples of shift ``F_v^d``.

    v=1 reads (t=k,   x=i-1/2)   v=2 reads (t=k,   x=i+1/2)
    v=3 reads (t=k+1, x=i-1/2)   v=4 reads (t=k+1, x=i+1/2)
    Reads that fall outside the spatial range are dropped (zero).
    """
    nd = grid.ndim
    dst = [slice(None)] * nd
    src = [slice(None)] * nd
    src[0] = slice(None, -1) if v in (1, 2) else slice(1, None)
    dst[d] = slice(1, None) if v in (1, 3) else slice(None, -1)
    return tuple(dst), tuple(src)


def decouple(grid: GridSpec, q: np.ndarray) -> np.ndarray:
    """Apply F: staggered field -> (4D+1) arrays on G_0^s.

    Block 0 is ``q_0``; block ``1 + 4(d-1) + (v-1)`` is ``F_v^d q_d``.
    """
    blocks = grid.split(q)
    out = np.zeros((4 * grid.D + 1,) + grid.cone_shape)
    out[0] = blocks[0]
    for d in range(1, grid.ndim):
        for v in range(1, 5):
            dst, src = _shift_slices(grid, d, v)
            out[1 + 4 * (d - 1) + (v - 1)][dst] = blocks[d][src]
    return out


def decouple_adjoint(grid: GridSpec, qt: np.ndarray) -> np.ndarray:
    expected = (4 * grid.D + 1,) + grid.cone_shape
    if qt.shape != expected:
        raise ShapeError(f"decoupled field shape {qt.shape} != {expected}")
    out = grid.zeros_staggered()
    blocks = grid.split(out)
    blocks[0][...] = qt[0]
    for d in range(1, grid.ndim):
        for v in range(1, 5):
            dst, src = _shift_slices(grid, d, v)
            blocks[d][src] += qt[1 + 4 * (d - 1) + (v - 1)][dst]
    return out


def avg_time_spaceadj(grid: GridSpec, s: Sequence[np.ndarray]) -> np.ndarray:
    """``L_T L_X^*`` applied to spatial blocks ``(s_1, ..., s_D)``; result on G_0^s."""
    grid.check_spatial_blocks(s)
    nd = grid.ndim
    centered = np.zeros(grid.centered_shape)
    for d, blk in enumerate(s, start=1):
        half = 0.5 * blk
        centered[_along(nd, d, slice(1, None))] += half
        centered[_along(nd, d, slice(None, -1))] += half
    return 0.5 * (centered[1:] + centered[:-1])


def avg_space_timeadj(grid: GridSpec, a: np.ndarray) -> list:
    """``L_X L_T^*``: array on G_0^s -> spatial blocks; adjoint of :func:`avg_time_spaceadj`."""
    grid.check_g0s(a)
    nd = grid.ndim
    centered = np.zeros(grid.centered_shape)
    centered[1:] += 0.5 * a
    centered[:-1] += 0.5 * a
    out = []
    for d in range(1, nd):
        out.append(0.5 * (centered[_along(nd, d, slice(1, None))]
                          + centered[_along(nd, d, slice(None, -1))]))
    return out


# ---------------------------------------------------------------------------
# cone embedding B F
# ---------------------------------------------------------------------------

def lift(grid: GridSpec, qt: np.ndarray, scale: Optional[np.ndarray] = None) -> np.ndarray:
    """Apply B to a decoupled field: ``(-x_0; c*x_1; ...; c*x_4D; x_0)``.

    ``c`` is ``sqrt(2)/2``, multiplied pointwise by ``scale`` when given
    (weighted problems fold ``sqrt(omega)`` in here).
    """
    out = np.empty((grid.n_cone_blocks,) + grid.cone_shape)
    out[0] = -qt[0]
    out[-1] = qt[0]
    out[1:-1] = SQRT_HALF * qt[1:]
    if scale is not None:
        out[1:-1] *= scale
    return out


def lift_adjoint(grid: GridSpec, w: np.ndarray, scale: Optional[np.ndarray] = None) -> np.ndarray:
    grid.check_cone(w)
    out = np.empty((4 * grid.D + 1,) + grid.cone_shape)
    np.subtract(w[-1], w[0], out=out[0])
    np.multiply(w[1:-1], SQRT_HALF_ADJ, out=out[1:])
    if scale is not None:
        out[1:] *= scale
    return out


def embed(grid: GridSpec, q: np.ndarray, scale: Optional[np.ndarray] = None) -> np.ndarray:
    """``B F q``: staggered field -> cone field (no offset ``d`` added)."""
    blocks = grid.split(q)
    out = np.zeros((grid.n_cone_blocks,) + grid.cone_shape)
    np.negative(blocks[0], out=out[0])
    out[-1] = blocks[0]
    for d in range(1, grid.ndim):
        sd = SQRT_HALF * blocks[d]
        for v in range(1, 5):
            dst, src = _shift_slices(grid, d, v)
            out[1 + 4 * (d - 1) + (v - 1)][dst] = sd[src]
    if scale is not None:
        out[1:-1] *= scale
    return out


def embed_adjoint(grid: GridSpec, w: np.ndarray, scale: Optional[np.ndarray] = None) -> np.ndarray:
    """``F^* B^* w``: cone field -> staggered field."""
    grid.check_cone(w)
    out = grid.zeros_staggered()
    blocks = grid.split(out)
    np.subtract(w[-1], w[0], out=blocks[0])
    mid = w[1:-1] if scale is None else w[1:-1] * scale
    for d in range(1, grid.ndim):
        acc = blocks[d]
        for v in range(1, 5):
            dst, src = _shift_slices(grid, d, v)
            acc[src] += mid[4 * (d - 1) + (v - 1)][dst]
        acc *= SQRT_HALF_ADJ
    return out


def gram_diagonal(grid: GridSpec, omega: Optional[np.ndarray] = None) -> np.ndarray:
    """Diagonal of ``F^* B^* B F`` as a staggered field.

    ``q_0`` entries are 2.  A ``q_d`` entry is half the (weighted) number of
    G_0^s points whose shift stencil reads it: 1 on the first and last time
    layers, 2 in between for unit weights.
    """
    out = grid.zeros_staggered()
    blocks = grid.split(out)
    blocks[0][...] = 2.0
    w = np.ones(grid.cone_shape) if omega is None else np.asarray(omega, dtype=float)
    grid.check_g0s(w)
    for d in range(1, grid.ndim):
        for v in range(1, 5):
            dst, src = _shift_slices(grid, d, v)
            blocks[d][src] += 0.5 * w[dst]
    return out
