"""Iteration engines for the cone reformulation of dynamic optimal transport.

All steps share the splitting variables ``(phi, z, q, alpha, beta)`` and
the penalty ``sigma``; they differ only in the order of the block updates.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .operators import Operators
from .problems import Problem
from .residuals import ResidualReport, kkt_dot, kkt_soc

ALGORITHMS = ("inpalm", "palm", "alg2", "accadmm")
STATUSES = ("converged", "max_iter", "max_time", "aborted")


@dataclass
class SigmaAdapt:
    enabled: bool = True
    interval: int = 50
    ratio: float = 5.0
    factor: float = 2.0


@dataclass
class Accel:
    theta: float = 2.0
    relax: float = 2.0
    restart_period: int = 200


@dataclass
class Multilevel:
    depth: int = 0
    min_tol: float = 1e-6


@dataclass
class SolverConfig:
    algorithm: str = "inpalm"
    tau: float = 1.9
    sigma0: float = 1.0
    tol: float = 1e-4
    max_iter: int = 10000
    max_time: float = float("inf")
    check_interval: int = 10
    stop_metric: str = "eta_dot"
    sigma_adapt: SigmaAdapt = field(default_factory=SigmaAdapt)
    accel: Accel = field(default_factory=Accel)
    multilevel: Multilevel = field(default_factory=Multilevel)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if self.algorithm == "alg2":
            if self.tau != 1.0:
                self.tau = 1.0
        elif self.algorithm in ("inpalm", "palm") and not 0 < self.tau < 2:
            raise ValueError("tau must lie in (0, 2)")
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 0 or self.check_interval < 1:
            raise ValueError("max_iter must be >= 0 and check_interval >= 1")
        if self.max_time < 0:
            raise ValueError("max_time must be nonnegative")
        if self.stop_metric not in ("eta_dot", "eta_soc", "both"):
            raise ValueError("stop_metric must be eta_dot, eta_soc or both")
        sa = self.sigma_adapt
        if sa.interval < 1 or sa.ratio <= 1 or sa.factor <= 1:
            raise ValueError("sigma adaptation needs interval >= 1, ratio > 1, factor > 1")
        ac = self.accel
        if ac.theta < 2 or not 0 < ac.relax <= 2 or ac.restart_period < 1:
            raise ValueError("accadmm needs theta >= 2, relax in (0, 2], restart_period >= 1")
        if self.multilevel.depth < 0:
            raise ValueError("multilevel depth must be nonnegative")

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        d = dict(d)
        subs = {"sigma_adapt": SigmaAdapt, "accel": Accel, "multilevel": Multilevel}
        for key, typ in subs.items():
            if key in d:
                sub = d[key]
                if not isinstance(sub, dict):
                    raise ValueError(f"{key} must be an object")
                unknown = set(sub) - set(typ.__dataclass_fields__)
                if unknown:
                    raise ValueError(f"unknown keys in {key}: {sorted(unknown)}")
                d[key] = typ(**sub)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown solver keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class SolverState:
    phi: np.ndarray
    z: np.ndarray
    q: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    sigma: float
    iter: int = 0
    # accadmm bookkeeping: momentum counter and the previous relaxed iterate
    k_acc: int = 0
    bar: Optional[tuple] = None
    elapsed: float = 0.0
    # (q, BFq) from the last sweep; reused only while ``q`` is the same object
    bfq_cache: Optional[tuple] = field(default=None, repr=False, compare=False)

    def embedded_q(self, ops: Operators) -> np.ndarray:
        if self.bfq_cache is not None and self.bfq_cache[0] is self.q:
            return self.bfq_cache[1]
        return ops.BF(self.q)

    @classmethod
    def zeros(cls, problem: Problem, sigma: float) -> "SolverState":
        grid = problem.grid
        return cls(grid.zeros_centered(), grid.cone_offset(), grid.zeros_staggered(),
                   grid.zeros_staggered(), grid.zeros_cone(), float(sigma))

    def arrays(self) -> tuple:
        return self.phi, self.z, self.q, self.alpha, self.beta

    def copy(self) -> "SolverState":
        bar = None if self.bar is None else tuple(a.copy() for a in self.bar)
        return SolverState(*(a.copy() for a in self.arrays()), self.sigma, self.iter,
                           self.k_acc, bar, self.elapsed)

    def is_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.arrays()) and np.isfinite(self.sigma)


@dataclass
class Solution:
    state: SolverState
    report: ResidualReport
    status: str
    problem: Problem
    config: SolverConfig
    history: list = field(default_factory=list)
    sigma_trace: list = field(default_factory=list)
    level_iters: list = field(default_factory=list)
    message: str = ""
    level_sigma_traces: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def iterations(self) -> int:
        return self.state.iter

    @property
    def objective(self) -> float:
        return self.report.objective


# ---------------------------------------------------------------------------
# block updates
# ---------------------------------------------------------------------------

def _phi_update(ops: Operators, q, alpha, sigma) -> np.ndarray:
    """Minimize the augmented Lagrangian over phi in rge(A^*)."""
    r = np.multiply(alpha, -1.0 / sigma)
    r += q
    b = ops.At(r)
    b -= ops.c / sigma
    return ops.solve(b)


def _z_update(ops: Operators, bfq, beta, sigma) -> np.ndarray:
    """``Pi_Q(BFq + d - beta/sigma)`` given a precomputed ``BFq``."""
    y = np.multiply(beta, -1.0 / sigma)
    y += bfq
    ops.add_offset(y)
    return ops.project(y, out=y)


def _q_update(ops: Operators, Aphi, z, alpha, beta, sigma) -> np.ndarray:
    """Diagonal solve ``(I + F*B*BF) q = A phi + alpha/sigma + F*B*(z - d + beta/sigma)``."""
    w = np.multiply(beta, 1.0 / sigma)
    w += z
    ops.add_offset(w, -1.0)
    rhs = ops.BFt(w)
    rhs += Aphi
    rhs += alpha * (1.0 / sigma)
    rhs *= ops.inv_diag
    return rhs


def _cone_gap(ops: Operators, z, bfq) -> np.ndarray:
    """``z - BFq - d``."""
    r = np.subtract(z, bfq)
    ops.add_offset(r, -1.0)
    return r


def _dual_step(state: SolverState, ops: Operators, Aphi, q, z, bfq, ts: float) -> None:
    """``alpha += ts (A phi - q)``, ``beta += ts (z - BFq - d)`` with one temporary each."""
    r = np.subtract(Aphi, q)
    r *= ts
    state.alpha += r
    g = _cone_gap(ops, z, bfq)
    g *= ts
    state.beta += g


def step_inpalm(state: SolverState, problem: Problem, cfg: SolverConfig,
                ops: Optional[Operators] = None) -> SolverState:
    """One sweep of the inexact proximal ALM; z uses the q of the previous sweep."""
    ops = ops or Operators.for_problem(problem)
    sigma = state.sigma
    tau = 1.0 if cfg.algorithm == "alg2" else cfg.tau
    phi = _phi_update(ops, state.q, state.alpha, sigma)
    Aphi = ops.A(phi)
    z = _z_update(ops, state.embedded_q(ops), state.beta, sigma)
    q = _q_update(ops, Aphi, z, state.alpha, state.beta, sigma)
    bfq = ops.BF(q)
    _dual_step(state, ops, Aphi, q, z, bfq, tau * sigma)
    state.phi, state.z, state.q = phi, z, q
    state.bfq_cache = (q, bfq)
    state.iter += 1
    return state


def step_palm(state: SolverState, problem: Problem, cfg: SolverConfig,
              ops: Optional[Operators] = None) -> SolverState:
    """Proximal ALM: q, then (phi, z), then q again, then the dual step."""
    ops = ops or Operators.for_problem(problem)
    sigma, alpha, beta = state.sigma, state.alpha, state.beta
    q = _q_update(ops, ops.A(state.phi), state.z, alpha, beta, sigma)
    phi = _phi_update(ops, q, alpha, sigma)
    Aphi = ops.A(phi)
    z = _z_update(ops, ops.BF(q), beta, sigma)
    q = _q_update(ops, Aphi, z, alpha, beta, sigma)
    bfq = ops.BF(q)
    _dual_step(state, ops, Aphi, q, z, bfq, cfg.tau * sigma)
    state.phi, state.z, state.q = phi, z, q
    state.bfq_cache = (q, bfq)
    state.iter += 1
    return state


def momentum_weights(k: int, theta: float) -> tuple:
    """Coefficients of ``(bar_new - w)`` and ``(bar_new - bar_old)`` at counter ``k``."""
    return theta / (2.0 * (k + theta)), k / (k + theta)


def step_accadmm(state: SolverState, problem: Problem, cfg: SolverConfig,
                 ops: Optional[Operators] = None) -> SolverState:
    """Accelerated ADMM with relaxation ``rho`` and momentum parameter ``theta``."""
    ops = ops or Operators.for_problem(problem)
    sigma = state.sigma
    phi, z, q, alpha, beta = state.arrays()
    if state.bar is None:
        state.bar = tuple(a.copy() for a in state.arrays())
        state.k_acc = 0

    Aphi = ops.A(phi)
    q_t = _q_update(ops, Aphi, z, alpha, beta, sigma)
    alpha_t = alpha + sigma * (Aphi - q_t)
    bfq_t = ops.BF(q_t)
    beta_t = beta + sigma * _cone_gap(ops, z, bfq_t)
    phi_t = _phi_update(ops, q_t, alpha_t, sigma)
    z_t = _z_update(ops, bfq_t, beta_t, sigma)

    rho = cfg.accel.relax
    c1, c2 = momentum_weights(state.k_acc, cfg.accel.theta)
    new_bar = []
    new = []
    for cur, tilde, old_bar in zip(state.arrays(), (phi_t, z_t, q_t, alpha_t, beta_t), state.bar):
        nb = (1.0 - rho) * cur + rho * tilde
        nxt = cur + c1 * (nb - cur)
        if c2:
            nxt += c2 * (nb - old_bar)
        new_bar.append(nb)
        new.append(nxt)
    state.phi, state.z, state.q, state.alpha, state.beta = new
    state.bar = tuple(new_bar)
    state.k_acc += 1
    state.iter += 1
    if state.k_acc >= cfg.accel.restart_period:
        restart_accel(state)
    return state


def restart_accel(state: SolverState) -> None:
    """Reset the momentum counter and anchor the relaxed iterate at the current point."""
    state.k_acc = 0
    state.bar = tuple(a.copy() for a in state.arrays())


STEPS = {
    "inpalm": step_inpalm,
    "palm": step_palm,
    "alg2": step_inpalm,
    "accadmm": step_accadmm,
}


# ---------------------------------------------------------------------------
# penalty adaptation
# ---------------------------------------------------------------------------

def update_sigma(state: SolverState, eta_P_soc: float, eta_D_soc: float,
                 cfg: SolverConfig) -> bool:
    """Residual balancing on ``r = eta_P_soc / eta_D_soc``; returns whether sigma changed."""
    sa = cfg.sigma_adapt
    if not sa.enabled:
        return False
    if eta_D_soc == 0:
        if eta_P_soc > 0:
            r = np.inf
        else:
            return False
    else:
        r = eta_P_soc / eta_D_soc
    if r > sa.ratio:
        state.sigma *= sa.factor
    elif r < 1.0 / sa.ratio:
        state.sigma /= sa.factor
    else:
        return False
    if cfg.algorithm == "accadmm":
        restart_accel(state)
    return True


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

HISTORY_FIELDS = ("iter", "eta_D", "eta_P", "eta_proj", "eta_S", "eta_dot",
                  "eta_soc", "sigma", "elapsed_s")


def _stop_value(cfg: SolverConfig, rep: ResidualReport) -> float:
    if cfg.stop_metric == "eta_dot":
        return rep.eta_dot
    if cfg.stop_metric == "eta_soc":
        return rep.eta_soc
    return max(rep.eta_dot, rep.eta_soc)


def run(problem: Problem, cfg: SolverConfig, initial_state: Optional[SolverState] = None,
        tol: Optional[float] = None, clock=time.perf_counter) -> Solution:
    """Iterate the configured scheme until the stopping metric drops below ``tol``.

    ``tol`` overrides ``cfg.tol`` (the multilevel driver uses it per level).
    On a non-finite state the run stops with status ``aborted`` and the
    report of the last finite residual evaluation.
    """
    cfg.validate()
    tol = cfg.tol if tol is None else tol
    ops = Operators.for_problem(problem)
    step = STEPS[cfg.algorithm]
    state = initial_state if initial_state is not None else SolverState.zeros(problem, cfg.sigma0)
    state.iter = 0
    state.k_acc = 0
    state.bar = None
    need_soc = cfg.stop_metric != "eta_dot"

    history: list = []
    sigma_trace = [(0, state.sigma)]
    t0 = clock()

    def evaluate(with_soc: bool) -> ResidualReport:
        Aphi = ops.A(state.phi)
        eD, eP, epj, eS, edot, obj = kkt_dot(state, problem, ops, Aphi)
        rep = ResidualReport(eD, eP, epj, eS, edot, objective=obj)
        if with_soc:
            rep.eta_proj_soc, rep.eta_P_soc, rep.eta_D_soc, rep.eta_soc = kkt_soc(
                state, problem, ops, Aphi)
        return rep

    def record(rep: ResidualReport) -> None:
        history.append((state.iter, rep.eta_D, rep.eta_P, rep.eta_proj, rep.eta_S,
                        rep.eta_dot, rep.eta_soc, state.sigma, clock() - t0))

    rep = evaluate(True)
    record(rep)
    last_rep = rep
    status = None
    message = ""
    if not np.isfinite(rep.eta_dot):
        status, message = "aborted", "non-finite residual in the initial state"
    elif _stop_value(cfg, rep) <= tol:
        status = "converged"

    while status is None:
        if state.iter >= cfg.max_iter:
            status = "max_iter"
            break
        if clock() - t0 >= cfg.max_time:
            status = "max_time"
            break
        step(state, problem, cfg, ops)
        k = state.iter
        at_sigma = cfg.sigma_adapt.enabled and k % cfg.sigma_adapt.interval == 0
        if k % cfg.check_interval and not at_sigma and k < cfg.max_iter:
            continue
        rep = evaluate(need_soc or at_sigma)
        if not (np.isfinite(rep.eta_dot) and state.is_finite()):
            status, message = "aborted", f"non-finite values at iteration {k}"
            rep = last_rep
            break
        record(rep)
        last_rep = rep
        if _stop_value(cfg, rep) <= tol:
            status = "converged"
            break
        if at_sigma and update_sigma(state, rep.eta_P_soc, rep.eta_D_soc, cfg):
            sigma_trace.append((k, state.sigma))

    if status in ("max_iter", "max_time") and history and history[-1][0] != state.iter:
        rep = evaluate(need_soc)
        record(rep)
    state.elapsed = clock() - t0
    if status != "aborted":
        full = evaluate(True)
        rep = full
    return Solution(state, rep, status, problem, cfg, history, sigma_trace,
                    [state.iter], message, [sigma_trace])


# ---------------------------------------------------------------------------
# solution extraction
# ---------------------------------------------------------------------------

@dataclass
class DensityResult:
    times: np.ndarray
    rho: np.ndarray
    momentum: list
    negative_count: np.ndarray
    negative_min: np.ndarray
    alpha1: np.ndarray


def extract_density(solution) -> DensityResult:
    """Density slices from ``alpha_1`` at the staggered times ``(k + 1/2) h_0``.

    ``rho[k]`` is the raw ``alpha_1`` slice; its entries approximate
    ``h_0`` times a density normalized to unit integral.  Negative entries
    are counted per slice.
    """
    state = solution.state if hasattr(solution, "state") else solution
    problem = solution.problem
    grid = problem.grid
    blocks = grid.split(state.alpha)
    a1 = blocks[0].copy()
    times = (np.arange(grid.n[0]) + 0.5) * grid.h[0]
    neg = a1 < 0
    axes = tuple(range(1, a1.ndim))
    count = neg.sum(axis=axes)
    mins = np.where(neg.any(axis=axes), a1.min(axis=axes), 0.0)
    return DensityResult(times, a1, [b.copy() for b in blocks[1:]], count, mins, a1)


def normalized_slices(rho: np.ndarray) -> np.ndarray:
    """Scale every time slice to unit sum (slices with zero sum are left as is)."""
    axes = tuple(range(1, rho.ndim))
    s = rho.sum(axis=axes, keepdims=True)
    return np.where(s != 0, rho / np.where(s != 0, s, 1.0), rho)


NEG_BIN_EDGES = np.concatenate([[0.0], 10.0 ** np.arange(-12, 1)])


def negativity_histogram(rho: np.ndarray) -> list:
    """Histogram of ``|rho|`` over negative entries of ``rho`` relative to ``max(rho)``.

    Bins have lower edges 0, 1e-12, 1e-11, ..., 1; each row is
    ``(bin_lower, count)``.
    """
    peak = float(np.max(rho)) if rho.size else 0.0
    peak = peak if peak > 0 else 1.0
    mags = -rho[rho < 0] / peak
    idx = np.searchsorted(NEG_BIN_EDGES, mags, side="right") - 1
    counts = np.bincount(idx, minlength=len(NEG_BIN_EDGES))
    return [(float(e), int(c)) for e, c in zip(NEG_BIN_EDGES, counts)]
