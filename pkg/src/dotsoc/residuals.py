"""KKT residuals of the cone program and of the original transport problem."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import grid as g
from .operators import Operators


def discrete_l2(x, grid: Optional[g.GridSpec] = None, cell_volume: Optional[float] = None) -> float:
    """``sqrt(cell_volume * sum x^2)``; lists of blocks are summed blockwise."""
    if cell_volume is None:
        cell_volume = 1.0 if grid is None else grid.cell_volume
    if isinstance(x, (list, tuple)):
        ss = sum(float(np.vdot(b, b)) for b in x)
    else:
        x = np.asarray(x, dtype=float)
        ss = float(np.vdot(x, x))
    return float(np.sqrt(cell_volume * ss))


@dataclass
class ResidualReport:
    eta_D: float = np.nan
    eta_P: float = np.nan
    eta_proj: float = np.nan
    eta_S: float = np.nan
    eta_dot: float = np.nan
    eta_proj_soc: float = np.nan
    eta_P_soc: float = np.nan
    eta_D_soc: float = np.nan
    eta_soc: float = np.nan
    objective: float = np.nan

    def as_dict(self) -> dict:
        return asdict(self)


def constraint_value(ops: Operators, q: np.ndarray) -> np.ndarray:
    """``f(q) = q_0 + 1/2 omega * L_T L_X^*(|q_1|^2, ..., |q_D|^2)`` on G_0^s."""
    grid = ops.grid
    blocks = grid.split(q)
    avg = g.avg_time_spaceadj(grid, [b * b for b in blocks[1:]])
    if ops.problem.omega is not None:
        avg *= ops.problem.omega
    return blocks[0] + 0.5 * avg


def momentum_model(ops: Operators, alpha1: np.ndarray, q: np.ndarray) -> list:
    """``g = L_X L_T^*(omega * alpha_1) * q_bar``, one array per spatial block."""
    grid = ops.grid
    a = alpha1 if ops.problem.omega is None else alpha1 * ops.problem.omega
    weights = g.avg_space_timeadj(grid, a)
    return [w * b for w, b in zip(weights, grid.split(q)[1:])]


def kkt_soc(state, problem, ops: Optional[Operators] = None, Aphi=None) -> tuple:
    """``(eta_proj_soc, eta_P_soc, eta_D_soc, eta_soc)`` for the cone program."""
    ops = ops or Operators.for_problem(problem)
    vol = ops.grid.cell_volume
    nrm = lambda x: discrete_l2(x, cell_volume=vol)  # noqa: E731

    if Aphi is None:
        Aphi = ops.A(state.phi)
    z, beta, q, alpha = state.z, state.beta, state.q, state.alpha

    proj = ops.project(z - beta)
    eta_proj = nrm(z - proj) / (1.0 + nrm(z) + nrm(beta))

    d = ops.offset()
    prim_lin = nrm(Aphi - q) / (1.0 + nrm(Aphi) + nrm(q))
    w = z - ops.BF(q)
    ops.add_offset(w, -1.0)
    prim_cone = nrm(w) / (1.0 + nrm(d))
    eta_P = max(prim_lin, prim_cone)

    dual_lin = nrm(ops.At(alpha) + ops.c) / (1.0 + nrm(ops.c))
    fb = ops.BFt(beta)
    dual_cone = nrm(fb + alpha) / (1.0 + nrm(fb) + nrm(alpha))
    eta_D = max(dual_lin, dual_cone)
    return eta_proj, eta_P, eta_D, max(eta_proj, eta_P, eta_D)


def kkt_dot(state, problem, ops: Optional[Operators] = None, Aphi=None) -> tuple:
    """``(eta_D, eta_P, eta_proj, eta_S, eta_dot, objective)`` of the transport KKT system.

    The multipliers are read off as ``Lambda_0 = alpha_1`` (time block of
    ``alpha``) and ``Lambda_bar = alpha_2`` (spatial blocks).
    """
    ops = ops or Operators.for_problem(problem)
    grid = ops.grid
    vol = grid.cell_volume
    nrm = lambda x: discrete_l2(x, cell_volume=vol)  # noqa: E731

    if Aphi is None:
        Aphi = ops.A(state.phi)
    q, alpha = state.q, state.alpha

    eta_D = nrm(Aphi - q) / (1.0 + nrm(Aphi) + nrm(q))
    eta_P = nrm(ops.At(alpha) + ops.c) / (1.0 + nrm(ops.c))

    ablocks = grid.split(alpha)
    a1 = ablocks[0]
    f = constraint_value(ops, q)
    eta_proj = nrm(a1 - np.maximum(0.0, f + a1)) / (1.0 + nrm(a1) + nrm(f))

    gm = momentum_model(ops, a1, q)
    a2 = ablocks[1:]
    diff = [a - b for a, b in zip(a2, gm)]
    eta_S = nrm(diff) / (1.0 + nrm(list(a2)) + nrm(gm))

    objective = float(np.vdot(ops.c, state.phi))
    return eta_D, eta_P, eta_proj, eta_S, max(eta_D, eta_P, eta_proj, eta_S), objective


def full_report(state, problem, ops: Optional[Operators] = None) -> ResidualReport:
    ops = ops or Operators.for_problem(problem)
    Aphi = ops.A(state.phi)
    eD, eP, epj, eS, edot, obj = kkt_dot(state, problem, ops, Aphi)
    spj, sP, sD, ssoc = kkt_soc(state, problem, ops, Aphi)
    return ResidualReport(eD, eP, epj, eS, edot, spj, sP, sD, ssoc, obj)
