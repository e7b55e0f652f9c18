"""Discrete transport problems: densities, cost vectors, weights and examples."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grid import GridSpec

KINDS = (
    "gaussian-sum",
    "laplace-exp",
    "quartic",
    "indicator-region",
    "dirac-points",
    "raster-file",
    "uniform",
)


@dataclass(frozen=True)
class DensitySpec:
    """Recipe for a spatial density; rasterized lazily on any grid.

    ``params`` per kind:

    * gaussian-sum: ``centers`` (list of points), ``chi`` (scalar or list)
    * laplace-exp: ``center``, ``rates`` (one per axis)
    * quartic: ``center``
    * indicator-region: ``shapes``, a list of dicts ``{"type": "disk"|"annulus"|"box", ...}``
    * dirac-points: ``points`` (list of points)
    * raster-file: ``path`` of a ``.raw`` file with its ``.meta`` sidecar;
      with ``as_is`` true the sampled values are used without renormalization
    * uniform: no parameters
    """

    kind: str
    params: dict = field(default_factory=dict)
    delta: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown density kind {self.kind!r}")
        if not np.isfinite(self.delta) or self.delta < 0:
            raise ValueError("delta must be a finite nonnegative number")
        if self.kind == "gaussian-sum":
            chi = np.atleast_1d(np.asarray(self.params.get("chi", 0.0), dtype=float))
            if np.any(chi <= 0):
                raise ValueError("gaussian widths must be positive")
        if self.kind == "dirac-points":
            pts = np.asarray(self.params.get("points", []), dtype=float)
            if pts.size == 0:
                raise ValueError("dirac-points needs at least one point")
            if np.any(pts < 0) or np.any(pts > 1):
                raise ValueError("dirac points must lie inside the unit cube")

    def with_delta(self, delta: float) -> "DensitySpec":
        return DensitySpec(self.kind, self.params, delta)


# ---------------------------------------------------------------------------
# rasterization
# ---------------------------------------------------------------------------

def node_coordinates(grid: GridSpec) -> list:
    """Open mesh of spatial node coordinates ``i_d h_d``."""
    axes = [np.arange(n + 1) / n for n in grid.n[1:]]
    return np.meshgrid(*axes, indexing="ij", sparse=True)


def _gaussian_sum(x, centers, chi) -> np.ndarray:
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    chi = np.broadcast_to(np.asarray(chi, dtype=float), (len(centers),))
    out = 0.0
    for mu, c in zip(centers, chi):
        r2 = sum((xd - m) ** 2 for xd, m in zip(x, mu))
        out = out + np.exp(-r2 / (2.0 * c * c))
    return out


def _region_member(x, shape: dict) -> np.ndarray:
    kind = shape["type"]
    if kind == "disk":
        r2 = sum((xd - m) ** 2 for xd, m in zip(x, shape["center"]))
        return r2 <= shape["radius"] ** 2
    if kind == "annulus":
        r2 = sum((xd - m) ** 2 for xd, m in zip(x, shape["center"]))
        return (r2 >= shape["inner"] ** 2) & (r2 <= shape["outer"] ** 2)
    if kind == "raster-file":
        # nodes where a stored weight raster drops below ``below`` (default 1)
        from .rawio import read_raw, subsample_to

        shape_ = tuple(np.broadcast_shapes(*(xd.shape for xd in x)))
        return subsample_to(read_raw(shape["path"]), shape_) < shape.get("below", 1.0)
    if kind == "box":
        inside = True
        for xd, lo, hi in zip(x, shape["lower"], shape["upper"]):
            inside = inside & (xd >= lo) & (xd <= hi)
        return inside
    raise ValueError(f"unknown region type {kind!r}")


def deposit_diracs(points, grid: GridSpec) -> np.ndarray:
    """Nearest-node deposition of equal point masses summing to one.

    A coordinate exactly halfway between two nodes goes to the lower index.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != grid.D:
        raise ValueError(f"points must have {grid.D} coordinates")
    if np.any(pts < 0) or np.any(pts > 1):
        raise ValueError("dirac point outside the unit cube")
    out = np.zeros(grid.spatial_shape)
    n = np.asarray(grid.n[1:])
    idx = np.ceil(pts * n - 0.5).astype(int)
    idx = np.clip(idx, 0, n)
    np.add.at(out, tuple(idx.T), 1.0 / len(pts))
    return out


def _evaluate(spec: DensitySpec, grid: GridSpec) -> np.ndarray:
    x = node_coordinates(grid)
    shape = grid.spatial_shape
    p = spec.params
    if spec.kind == "uniform":
        return np.ones(shape)
    if spec.kind == "gaussian-sum":
        return np.broadcast_to(_gaussian_sum(x, p["centers"], p["chi"]), shape)
    if spec.kind == "laplace-exp":
        arg = sum(-a * np.abs(xd - m) for xd, a, m in zip(x, p["rates"], p["center"]))
        return np.broadcast_to(np.exp(arg), shape)
    if spec.kind == "quartic":
        return np.broadcast_to(sum((xd - m) ** 4 for xd, m in zip(x, p["center"])), shape)
    if spec.kind == "indicator-region":
        member = np.zeros(shape, dtype=bool)
        for s in p["shapes"]:
            member |= np.broadcast_to(_region_member(x, s), shape)
        if not member.any():
            raise ValueError("indicator region contains no grid node")
        return member.astype(float)
    if spec.kind == "dirac-points":
        return deposit_diracs(p["points"], grid)
    if spec.kind == "raster-file":
        from .rawio import read_raw, subsample_to

        return subsample_to(read_raw(p["path"]), shape)
    raise ValueError(f"unknown density kind {spec.kind!r}")


def rasterize_density(spec: DensitySpec, grid: GridSpec) -> np.ndarray:
    """Sample at the spatial nodes, normalize to unit sum, then add ``delta``."""
    vals = np.array(_evaluate(spec, grid), dtype=float)
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise ValueError("density values must be finite and nonnegative")
    total = vals.sum()
    if total <= 0:
        raise ValueError("density has zero total mass on this grid")
    if spec.kind == "raster-file" and spec.params.get("as_is", False):
        return vals + spec.delta
    return vals / total + spec.delta


# ---------------------------------------------------------------------------
# cost vector and weights
# ---------------------------------------------------------------------------

def build_cost_vector(rho0: np.ndarray, rho1: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Centered field that is ``+rho0`` on the first and ``-rho1`` on the last time slice.

    Each slice is scaled so that ``h_X * sum`` equals one in magnitude.
    """
    rho0 = np.asarray(rho0, dtype=float)
    rho1 = np.asarray(rho1, dtype=float)
    for name, r in (("rho0", rho0), ("rho1", rho1)):
        if r.shape != grid.spatial_shape:
            raise ValueError(f"{name} has shape {r.shape}, expected {grid.spatial_shape}")
        if np.any(r < 0):
            raise ValueError(f"{name} must be nonnegative")
        if r.sum() <= 0:
            raise ValueError(f"{name} has zero total mass")
    hx = grid.h_space
    c = np.zeros(grid.centered_shape)
    c[0] = rho0 / (rho0.sum() * hx)
    c[-1] = -rho1 / (rho1.sum() * hx)
    return c


def build_weights(obstacle_mask: np.ndarray, omega_min: float) -> np.ndarray:
    if not omega_min > 0:
        raise ValueError("omega_min must be positive")
    mask = np.asarray(obstacle_mask, dtype=bool)
    return np.where(mask, float(omega_min), 1.0)


# ---------------------------------------------------------------------------
# problems
# ---------------------------------------------------------------------------

@dataclass
class Problem:
    """A discretized transport problem on one grid.

    ``mask_spec`` describes an obstacle (a list of region shapes) and
    ``omega_min`` its weight; both are kept so coarser or finer copies of the
    problem can be rebuilt with :meth:`on_grid`.
    """

    grid: GridSpec
    c: np.ndarray
    rho0_spec: Optional[DensitySpec] = None
    rho1_spec: Optional[DensitySpec] = None
    omega: Optional[np.ndarray] = None
    mask_spec: Optional[list] = None
    omega_min: float = 1e-6
    label: str = "custom"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid.check_centered(self.c)
        if self.omega is not None:
            self.grid.check_g0s(self.omega)
            if np.any(self.omega <= 0):
                raise ValueError("weights must be positive")

    @classmethod
    def from_specs(cls, grid: GridSpec, rho0_spec: DensitySpec, rho1_spec: DensitySpec,
                   mask_spec: Optional[list] = None, omega_min: float = 1e-6,
                   label: str = "custom", meta: Optional[dict] = None) -> "Problem":
        r0, r1, omega = endpoint_rasters(grid, rho0_spec, rho1_spec, mask_spec, omega_min)
        return cls(grid, build_cost_vector(r0, r1, grid), rho0_spec, rho1_spec, omega,
                   mask_spec, omega_min, label, dict(meta or {}))

    def on_grid(self, grid: GridSpec) -> "Problem":
        """Re-rasterize the same densities (and obstacle) on another grid."""
        if self.rho0_spec is None or self.rho1_spec is None:
            raise ValueError("problem has no density specs and cannot be rebuilt")
        return Problem.from_specs(grid, self.rho0_spec, self.rho1_spec, self.mask_spec,
                                  self.omega_min, self.label, self.meta)

    def densities(self) -> tuple:
        """The two endpoint densities scaled to unit discrete sum."""
        r0 = self.c[0] / self.c[0].sum()
        r1 = self.c[-1] / self.c[-1].sum()
        return r0, r1


def endpoint_rasters(grid: GridSpec, rho0_spec: DensitySpec, rho1_spec: DensitySpec,
                     mask_spec: Optional[list] = None, omega_min: float = 1e-6) -> tuple:
    """``(rho0, rho1, omega)`` on ``grid``; ``omega`` is None without an obstacle."""
    r0 = rasterize_density(rho0_spec, grid)
    r1 = rasterize_density(rho1_spec, grid)
    if not mask_spec:
        return r0, r1, None
    mask = obstacle_mask(mask_spec, grid)
    # obstacles carry no mass, so delta and analytic tails are cut there
    r0 = np.where(mask[0], 0.0, r0)
    r1 = np.where(mask[0], 0.0, r1)
    return r0, r1, build_weights(mask, omega_min)


def obstacle_mask(shapes: list, grid: GridSpec) -> np.ndarray:
    """Boolean mask on ``G_0^s``; the spatial region is replicated in time."""
    x = node_coordinates(grid)
    member = np.zeros(grid.spatial_shape, dtype=bool)
    for s in shapes:
        member |= np.broadcast_to(_region_member(x, s), grid.spatial_shape)
    return np.broadcast_to(member, grid.cone_shape).copy()


# ---------------------------------------------------------------------------
# examples
# ---------------------------------------------------------------------------

EXAMPLE_IDS = ("ex1", "ex2", "ex3", "ex4", "ex5", "ex6", "ex7")

_FOUR = [[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75]]

# obstacle stand-in: a vertical wall with a single opening around x2 = 0.5
WALL_SHAPES = [
    {"type": "box", "lower": [0.46, 0.0], "upper": [0.54, 0.40]},
    {"type": "box", "lower": [0.46, 0.60], "upper": [0.54, 1.0]},
]


def gaussian_translation(chi: float, mu: tuple, delta: float = 0.0) -> tuple:
    """Endpoint specs of the translating-Gaussian problem (2-D)."""
    m1, m2 = mu
    r0 = DensitySpec("gaussian-sum", {"centers": [[m1, m2]], "chi": chi}, delta)
    r1 = DensitySpec("gaussian-sum", {"centers": [[m2, m1]], "chi": chi}, delta)
    return r0, r1


def random_dirac_points(n_points: int, seed: int) -> list:
    rng = np.random.default_rng(seed)
    return rng.uniform(0.05, 0.95, size=(n_points, 2)).tolist()


def example_specs(ex_id: str, delta: float = 0.0, seed: int = 0,
                  n_points: int = 30) -> tuple:
    """``(rho0_spec, rho1_spec, mask_spec)`` of a named example."""
    if ex_id == "ex1":
        r0, r1 = gaussian_translation(np.sqrt(0.05), (0.25, 0.75), delta)
        return r0, r1, None
    if ex_id == "ex2":
        r0 = DensitySpec("gaussian-sum", {"centers": [[0.25, 0.25]], "chi": 0.1}, delta)
        r1 = DensitySpec("gaussian-sum", {"centers": _FOUR, "chi": 0.05}, delta)
        return r0, r1, None
    if ex_id == "ex3":
        r0 = DensitySpec("laplace-exp", {"center": [0.25, 0.25], "rates": [3.0, 5.0]}, delta)
        r1 = DensitySpec("gaussian-sum", {"centers": _FOUR, "chi": 0.05}, delta)
        return r0, r1, None
    if ex_id == "ex4":
        r0 = DensitySpec("quartic", {"center": [0.5, 0.5]}, delta)
        r1 = DensitySpec("gaussian-sum", {"centers": _FOUR, "chi": 0.05}, delta)
        return r0, r1, None
    if ex_id == "ex5":
        # approximate geometry: a ring spreading into four separate disks
        r0 = DensitySpec("indicator-region", {"shapes": [
            {"type": "annulus", "center": [0.5, 0.5], "inner": 0.15, "outer": 0.3}]}, delta)
        r1 = DensitySpec("indicator-region", {"shapes": [
            {"type": "disk", "center": c, "radius": 0.12} for c in _FOUR]}, delta)
        return r0, r1, None
    if ex_id == "ex6":
        r0 = DensitySpec("gaussian-sum", {"centers": [[0.2, 0.25]], "chi": 0.06}, delta)
        r1 = DensitySpec("gaussian-sum", {"centers": [[0.8, 0.25]], "chi": 0.06}, delta)
        return r0, r1, WALL_SHAPES
    if ex_id == "ex7":
        r0 = DensitySpec("gaussian-sum", {"centers": [[0.5, 0.5]], "chi": 0.15}, delta)
        r1 = DensitySpec("dirac-points", {"points": random_dirac_points(n_points, seed)}, 0.0)
        return r0, r1, None
    raise ValueError(f"unknown example id {ex_id!r}; expected one of {EXAMPLE_IDS}")


def make_example(ex_id: str, delta: float, grid, seed: int = 0,
                 n_points: int = 30) -> tuple:
    """Assemble a named example on ``grid``; returns ``(problem, (rho0_spec, rho1_spec))``."""
    if not isinstance(grid, GridSpec):
        grid = GridSpec(tuple(grid))
    if ex_id not in EXAMPLE_IDS:
        raise ValueError(f"unknown example id {ex_id!r}; expected one of {EXAMPLE_IDS}")
    if grid.D != 2:
        raise ValueError("the named examples are defined on two spatial dimensions")
    r0, r1, mask = example_specs(ex_id, delta, seed, n_points)
    meta = {"example": ex_id, "delta": float(delta), "seed": int(seed)}
    if ex_id == "ex7":
        meta["n_points"] = int(n_points)
    prob = Problem.from_specs(grid, r0, r1, mask_spec=mask, omega_min=1e-6,
                              label=ex_id, meta=meta)
    return prob, (r0, r1)
