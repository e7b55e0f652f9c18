"""Command-line front end: ``solve``, ``compare`` and ``example``.

Exit codes: 0 converged, 1 iteration or time budget exhausted, 2 invalid
configuration or arguments, 3 solver aborted on non-finite values.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .grid import GridSpec
from .multilevel import build_schedule, solve_multilevel
from .problems import (EXAMPLE_IDS, DensitySpec, Problem, endpoint_rasters, example_specs,
                       make_example)
from .rawio import read_raw, write_raw
from .solvers import (ALGORITHMS, HISTORY_FIELDS, Solution, SolverConfig, extract_density,
                      negativity_histogram, normalized_slices)

EXIT_OK, EXIT_BUDGET, EXIT_CONFIG, EXIT_ABORTED = 0, 1, 2, 3

THREADS_ENV = "DOTSOC_THREADS"

RUN_KEYS = ("problem", "grid", "solver", "snapshot_times", "label")
EXAMPLE_KEYS = ("example", "delta", "seed", "n_points")
FILE_KEYS = ("rho0", "rho1", "weight")
COMPARE_COLUMNS = ("problem", "grid", "delta", "algorithm", "eta_dot", "finest_iter", "time_s")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Validated contents of a JSON run configuration."""

    grid: GridSpec
    solver: SolverConfig
    example: Optional[str] = None
    delta: float = 0.0
    seed: int = 0
    n_points: int = 30
    files: dict = field(default_factory=dict)
    snapshot_times: Optional[list] = None
    label: str = ""

    def build_problem(self) -> Problem:
        if self.example is not None:
            prob, _ = make_example(self.example, self.delta, self.grid, self.seed, self.n_points)
            return prob
        r0 = DensitySpec("raster-file", {"path": self.files["rho0"], "as_is": True})
        r1 = DensitySpec("raster-file", {"path": self.files["rho1"], "as_is": True})
        mask, omega_min = None, 1e-6
        if "weight" in self.files:
            w = read_raw(self.files["weight"])
            if np.any(w <= 0) or not np.all(np.isfinite(w)):
                raise ConfigError("weight raster must be finite and positive")
            if np.any(w < 1.0):
                mask = [{"type": "raster-file", "path": self.files["weight"]}]
                omega_min = float(w.min())
        return Problem.from_specs(self.grid, r0, r1, mask, omega_min,
                                  self.label or "files", {"delta": self.delta})

    @property
    def problem_name(self) -> str:
        return self.label or self.example or "files"


def _parse_grid(value) -> GridSpec:
    if isinstance(value, str):
        value = value.split(",")
    try:
        n = tuple(int(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"grid must be a list of integers, got {value!r}") from exc
    if len(n) < 2 or any(v < 1 for v in n):
        raise ConfigError(f"grid needs a time and at least one space dimension, got {n}")
    return GridSpec(n)


def _raster_shape_ok(path: Path, grid: GridSpec) -> None:
    shape = read_raw(path).shape
    if len(shape) != grid.D:
        raise ConfigError(f"raster {path} has {len(shape)} axes, grid has {grid.D}")
    for fine, coarse in zip(shape, grid.spatial_shape):
        if (fine - 1) % (coarse - 1 if coarse > 1 else 1):
            raise ConfigError(f"raster {path} of shape {shape} does not cover grid {grid.n}")


def parse_run_config(data: dict, base: Path = Path(".")) -> RunConfig:
    """Validate a decoded JSON configuration; paths are relative to ``base``."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(data) - set(RUN_KEYS)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    for key in ("problem", "grid"):
        if key not in data:
            raise ConfigError(f"missing configuration key {key!r}")
    grid = _parse_grid(data["grid"])
    solver_d = data.get("solver", {})
    if not isinstance(solver_d, dict):
        raise ConfigError("solver must be an object")
    try:
        solver = SolverConfig.from_dict(solver_d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    try:
        build_schedule(grid, solver.multilevel.depth, solver.tol, solver.multilevel.min_tol)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    prob = data["problem"]
    if not isinstance(prob, dict):
        raise ConfigError("problem must be an object")
    cfg = RunConfig(grid, solver, label=str(data.get("label", "")))
    if "example" in prob:
        unknown = set(prob) - set(EXAMPLE_KEYS)
        if unknown:
            raise ConfigError(f"unknown problem keys: {sorted(unknown)}")
        if prob["example"] not in EXAMPLE_IDS:
            raise ConfigError(f"unknown example {prob['example']!r}")
        if grid.D != 2:
            raise ConfigError("the named examples need a grid with two space dimensions")
        cfg.example = prob["example"]
        cfg.seed = int(prob.get("seed", 0))
        cfg.n_points = int(prob.get("n_points", 30))
        if cfg.n_points < 1:
            raise ConfigError("n_points must be positive")
    else:
        unknown = set(prob) - set(FILE_KEYS) - {"delta"}
        if unknown:
            raise ConfigError(f"unknown problem keys: {sorted(unknown)}")
        for key in ("rho0", "rho1"):
            if key not in prob:
                raise ConfigError(f"problem needs either 'example' or both 'rho0' and 'rho1'")
        for key in FILE_KEYS:
            if key in prob:
                path = (base / prob[key]).resolve()
                if not path.is_file():
                    raise ConfigError(f"raster file {path} not found")
                try:
                    _raster_shape_ok(path, grid)
                except (OSError, ValueError) as exc:
                    raise ConfigError(str(exc)) from exc
                cfg.files[key] = str(path)
    try:
        cfg.delta = float(prob.get("delta", 0.0))
    except (TypeError, ValueError) as exc:
        raise ConfigError("delta must be a number") from exc
    if not np.isfinite(cfg.delta) or cfg.delta < 0:
        raise ConfigError("delta must be a finite nonnegative number")

    times = data.get("snapshot_times")
    if times is not None:
        try:
            times = [float(t) for t in times]
        except (TypeError, ValueError) as exc:
            raise ConfigError("snapshot_times must be a list of numbers") from exc
        if any(not 0.0 <= t <= 1.0 for t in times):
            raise ConfigError("snapshot times must lie in [0, 1]")
        cfg.snapshot_times = times
    return cfg


def load_run_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    return parse_run_config(data, path.parent)


def apply_thread_env() -> None:
    """Validate the thread-count variable early; the transforms read it themselves."""
    val = os.environ.get(THREADS_ENV)
    if val is not None and (not val.strip().isdigit() or int(val) < 1):
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {val!r}")


# ---------------------------------------------------------------------------
# writers
# ---------------------------------------------------------------------------

def exit_code(status: str) -> int:
    return {"converged": EXIT_OK, "aborted": EXIT_ABORTED}.get(status, EXIT_BUDGET)


def _finite_or_none(x):
    x = float(x)
    return x if np.isfinite(x) else None


def summary_dict(sol: Solution, cfg: RunConfig) -> dict:
    rep = sol.report
    return {
        "problem": cfg.problem_name,
        "grid": list(sol.problem.grid.n),
        "delta": cfg.delta,
        "algorithm": sol.config.algorithm,
        "status": sol.status,
        "message": sol.message,
        "tol": sol.config.tol,
        "level_iters": [int(k) for k in sol.level_iters],
        "finest_iter": int(sol.iterations),
        "eta": {k: _finite_or_none(v) for k, v in rep.as_dict().items()},
        "objective": _finite_or_none(rep.objective),
        "sigma_trace": [[int(k), float(s)] for k, s in sol.sigma_trace],
        "level_sigma_traces": [[[int(k), float(s)] for k, s in tr]
                               for tr in sol.level_sigma_traces],
        "elapsed_s": float(sol.state.elapsed),
        "solver": asdict(sol.config),
    }


def write_residuals(path: Path, history: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_FIELDS)
        for row in history:
            w.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])


def _snapshot_indices(times: np.ndarray, requested: Optional[list]) -> list:
    if requested is None:
        return list(range(len(times)))
    out = []
    for t in requested:
        k = int(np.argmin(np.abs(times - t)))
        if k not in out:
            out.append(k)
    return sorted(out)


def write_snapshots(out: Path, sol: Solution, requested: Optional[list]) -> None:
    """One raw file per selected time slice, each scaled to unit sum, plus a manifest."""
    dr = extract_density(sol)
    rho = normalized_slices(dr.rho)
    snap = out / "snapshots"
    snap.mkdir(exist_ok=True)
    lines = ["# file, t, shape, dtype, order"]
    for k in _snapshot_indices(dr.times, requested):
        name = f"rho_{k:04d}.raw"
        t = float(dr.times[k])
        write_raw(snap / name, rho[k], t=repr(t), slice=k, normalization="unit-sum")
        lines.append(f"{name}, {t!r}, {','.join(map(str, rho[k].shape))}, float64-le, row-major")
    (snap / "manifest.txt").write_text("\n".join(lines) + "\n")
    with open(out / "negativity.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("bin_lower", "count"))
        for lo, count in negativity_histogram(dr.alpha1):
            w.writerow((repr(lo), count))


def write_run_outputs(out: Path, sol: Solution, cfg: RunConfig) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(json.dumps(summary_dict(sol, cfg), indent=2) + "\n")
    write_residuals(out / "residuals.csv", sol.history)
    write_snapshots(out, sol, cfg.snapshot_times)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _error(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_CONFIG


def cmd_solve(config_path, out_dir) -> int:
    try:
        apply_thread_env()
        cfg = load_run_config(config_path)
        problem = cfg.build_problem()
    except (ConfigError, ValueError, OSError) as exc:
        return _error(str(exc))
    sol = solve_multilevel(problem, cfg.solver)
    write_run_outputs(Path(out_dir), sol, cfg)
    print(f"{sol.status}: levels {sol.level_iters} eta_dot {sol.report.eta_dot:.3e} "
          f"objective {sol.report.objective:.6e}")
    return exit_code(sol.status)


def parse_algorithms(text: str) -> list:
    names = [a.strip() for a in text.split(",") if a.strip()]
    if not names:
        raise ConfigError("empty algorithm list")
    bad = [a for a in names if a not in ALGORITHMS]
    if bad:
        raise ConfigError(f"unknown algorithms {bad}; expected names from {ALGORITHMS}")
    return names


def cmd_compare(config_path, algorithms, out_dir) -> int:
    """Run each variant from the same starting point and tabulate the outcomes."""
    try:
        apply_thread_env()
        names = parse_algorithms(algorithms) if isinstance(algorithms, str) else list(algorithms)
        parse_algorithms(",".join(names))
        cfg = load_run_config(config_path)
        problem = cfg.build_problem()
    except (ConfigError, ValueError, OSError) as exc:
        return _error(str(exc))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, codes = [], []
    for name in names:
        solver = SolverConfig.from_dict({**asdict(cfg.solver), "algorithm": name})
        sol = solve_multilevel(problem, solver)
        write_run_outputs(out / name, sol, cfg)
        rows.append((cfg.problem_name, "x".join(map(str, problem.grid.n)), repr(cfg.delta), name,
                     repr(float(sol.report.eta_dot)), int(sol.iterations),
                     f"{sol.state.elapsed:.3f}"))
        codes.append(exit_code(sol.status))
    with open(out / "compare.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPARE_COLUMNS)
        w.writerows(rows)
    for row in rows:
        print(",".join(map(str, row)))
    return max(codes, key=lambda c: (c == EXIT_ABORTED, c))


def cmd_example(ex_id, grid, delta, seed, out_dir, n_points: int = 30) -> int:
    """Write the endpoint rasters (and the weight raster of an obstacle example)."""
    try:
        if ex_id not in EXAMPLE_IDS:
            raise ConfigError(f"unknown example {ex_id!r}; expected one of {EXAMPLE_IDS}")
        g = _parse_grid(grid)
        if g.D != 2:
            raise ConfigError("the named examples need a grid with two space dimensions")
        delta = float(delta)
        r0s, r1s, mask = example_specs(ex_id, delta, int(seed), int(n_points))
        r0, r1, omega = endpoint_rasters(g, r0s, r1s, mask, 1e-6)
    except (ConfigError, ValueError) as exc:
        return _error(str(exc))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    info = dict(example=ex_id, grid=",".join(map(str, g.n)), delta=repr(delta), seed=int(seed))
    write_raw(out / "rho0.raw", r0, t="0.0", **info)
    write_raw(out / "rho1.raw", r1, t="1.0", **info)
    problem = {"rho0": "rho0.raw", "rho1": "rho1.raw", "delta": delta}
    if omega is not None:
        write_raw(out / "weight.raw", omega[0], **info)
        problem["weight"] = "weight.raw"
    config = {"problem": problem, "grid": list(g.n), "label": ex_id, "solver": {}}
    (out / "config.json").write_text(json.dumps(config, indent=2) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dotsoc", description="Dynamic optimal transport solver.")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", help="solve one problem described by a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    c = sub.add_parser("compare", help="run several algorithms on one problem")
    c.add_argument("--config", required=True)
    c.add_argument("--algorithms", required=True, help="comma separated, e.g. inpalm,palm")
    c.add_argument("--out", required=True)
    e = sub.add_parser("example", help="write the endpoint rasters of a named example")
    e.add_argument("--id", required=True, dest="ex_id")
    e.add_argument("--grid", required=True, help="n0,n1,n2")
    e.add_argument("--delta", type=float, default=0.0)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--points", type=int, default=30, help="number of point masses (ex7)")
    e.add_argument("--out", required=True)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.command == "solve":
        return cmd_solve(args.config, args.out)
    if args.command == "compare":
        return cmd_compare(args.config, args.algorithms, args.out)
    return cmd_example(args.ex_id, args.grid, args.delta, args.seed, args.out, args.points)


if __name__ == "__main__":
    sys.exit(main())
