"""Spectral solver for the Neumann Laplacian ``A^* A`` on the centered grid.

The 1-D factor of ``A^* A`` along axis ``d`` is the Neumann second-difference
matrix on ``n_d + 1`` nodes scaled by ``1/h_d^2``; its eigenvectors are the
DCT-II basis with eigenvalues ``(4/h_d^2) sin^2(pi k / (2(n_d+1)))``.
"""

from __future__ import annotations

import os
from functools import lru_cache

import numpy as np
from scipy import fft

from .grid import GridSpec


def _workers() -> int | None:
    val = os.environ.get("DOTSOC_THREADS")
    return int(val) if val else None


class NeumannPoisson:
    """Cached inverse eigenvalues for one grid; safe to share read-only."""

    def __init__(self, grid: GridSpec):
        self.grid = grid
        eig = np.zeros(grid.centered_shape)
        for d, (n, h) in enumerate(zip(grid.n, grid.h)):
            k = np.arange(n + 1)
            lam = (4.0 / h**2) * np.sin(np.pi * k / (2.0 * (n + 1))) ** 2
            shape = [1] * grid.ndim
            shape[d] = n + 1
            eig = eig + lam.reshape(shape)
        eig.flat[0] = 1.0
        inv = 1.0 / eig
        inv.flat[0] = 0.0
        self.inv_eig = inv

    def solve(self, b: np.ndarray) -> np.ndarray:
        self.grid.check_centered(b)
        w = _workers()
        coeffs = fft.dctn(b, type=2, norm="ortho", workers=w)
        coeffs *= self.inv_eig
        return fft.idctn(coeffs, type=2, norm="ortho", workers=w)


@lru_cache(maxsize=16)
def poisson_for(grid: GridSpec) -> NeumannPoisson:
    return NeumannPoisson(grid)


def laplacian_apply(grid: GridSpec, phi: np.ndarray) -> np.ndarray:
    """``A^* A phi`` as a fused stencil (positive semidefinite sign convention)."""
    grid.check_centered(phi)
    out = np.zeros(grid.centered_shape)
    nd = grid.ndim
    for d, h in enumerate(grid.h):
        diff = np.diff(phi, axis=d) / h**2
        hi = [slice(None)] * nd
        lo = [slice(None)] * nd
        hi[d] = slice(1, None)
        lo[d] = slice(None, -1)
        out[tuple(hi)] += diff
        out[tuple(lo)] -= diff
    return out


def solve_neumann(grid: GridSpec, b: np.ndarray) -> np.ndarray:
    """Zero-mean ``phi`` with ``A^* A phi = b - mean(b)``."""
    return poisson_for(grid).solve(np.asarray(b, dtype=float))

