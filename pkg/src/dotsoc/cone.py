"""Projections onto the second-order cone ``{y : y_0 >= ||y_bar||}``."""

from __future__ import annotations

import numpy as np


def project_soc_point(y) -> np.ndarray:
    """Euclidean projection of a single vector ``(y_0; y_bar)`` onto the cone."""
    y = np.asarray(y, dtype=float)
    y0 = y[0]
    nrm = float(np.linalg.norm(y[1:]))
    if nrm <= y0:
        return y.copy()
    if nrm <= -y0:
        return np.zeros_like(y)
    coef = 0.5 * (y0 + nrm)
    out = np.empty_like(y)
    out[0] = coef
    out[1:] = (coef / nrm) * y[1:]
    return out


def project_cone_field(y: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Project every tuple ``y[:, i]`` onto the cone.

    Axis 0 carries the cone coordinates, the remaining axes index points.
    ``out`` may alias ``y``.
    """
    y = np.asarray(y, dtype=float)
    y0 = y[0]
    nrm = np.sqrt(np.einsum("i...,i...->...", y[1:], y[1:]))
    inside = nrm <= y0
    polar = (nrm <= -y0) & ~inside
    head = 0.5 * (y0 + nrm)
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = np.where(inside, 1.0, np.where(polar, 0.0, head / nrm))
    head = np.where(inside, y0, np.where(polar, 0.0, head))
    if out is None:
        out = np.empty_like(y)
    np.multiply(y[1:], tail, out=out[1:])
    out[0] = head
    return out


def in_cone(y: np.ndarray, rtol: float = 0.0) -> np.ndarray:
    """Pointwise membership test; ``rtol`` widens the cone by ``rtol*(1+|y_0|)``."""
    y = np.asarray(y, dtype=float)
    nrm = np.sqrt(np.einsum("i...,i...->...", y[1:], y[1:]))
    return y[0] >= nrm - rtol * (1.0 + np.abs(y[0]))


def build_weighted_embed_scale(omega: np.ndarray) -> np.ndarray:
    """Pointwise multiplier ``sqrt(omega)`` for the spatial embedding blocks.

    Folding the weight into the embedding turns the weighted constraint
    ``x_0 + (omega/8) sum x_v^2 <= 0`` into membership of the standard cone.
    """
    omega = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(omega)) or np.any(omega <= 0):
        raise ValueError("weights must be finite and strictly positive")
    return np.sqrt(omega)
