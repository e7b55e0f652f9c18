"""Problem-bound operator bundle shared by the solvers and residuals."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import grid as g
from .cone import build_weighted_embed_scale, project_cone_field
from .poisson import NeumannPoisson, poisson_for
from .problems import Problem


@dataclass
class Operators:
    """The linear maps of the cone program for one problem.

    ``scale`` is ``sqrt(omega)`` on weighted problems and ``None`` otherwise.
    The offset ``d`` is never stored; it only touches the first and last cone
    blocks, which :meth:`add_offset` handles in place.
    """

    problem: Problem
    scale: Optional[np.ndarray]
    inv_diag: np.ndarray
    poisson: NeumannPoisson

    @classmethod
    def for_problem(cls, problem: Problem) -> "Operators":
        cached = problem.__dict__.get("_ops")
        if cached is not None:
            return cached
        grid = problem.grid
        scale = None
        if problem.omega is not None:
            scale = build_weighted_embed_scale(problem.omega)
        inv_diag = 1.0 / (1.0 + g.gram_diagonal(grid, problem.omega))
        ops = cls(problem, scale, inv_diag, poisson_for(grid))
        problem.__dict__["_ops"] = ops
        return ops

    @property
    def grid(self) -> g.GridSpec:
        return self.problem.grid

    @property
    def c(self) -> np.ndarray:
        return self.problem.c

    def A(self, phi: np.ndarray) -> np.ndarray:
        return g.gradient(self.grid, phi)

    def At(self, q: np.ndarray) -> np.ndarray:
        return g.gradient_adjoint(self.grid, q)

    def BF(self, q: np.ndarray) -> np.ndarray:
        return g.embed(self.grid, q, self.scale)

    def BFt(self, w: np.ndarray) -> np.ndarray:
        return g.embed_adjoint(self.grid, w, self.scale)

    def solve(self, b: np.ndarray) -> np.ndarray:
        return self.poisson.solve(b)

    def project(self, y: np.ndarray, out: Optional[np.ndarray] = None) -> np.ndarray:
        return project_cone_field(y, out=out)

    @staticmethod
    def add_offset(w: np.ndarray, factor: float = 1.0) -> np.ndarray:
        """In place ``w += factor * d``."""
        w[0] += factor
        w[-1] += factor
        return w

    def offset(self) -> np.ndarray:
        return self.grid.cone_offset()
