"""Raw little-endian float64 arrays with a plain-text ``key=value`` sidecar."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta") if path.suffix != ".raw" else path.with_suffix(".meta")


def write_raw(path, array: np.ndarray, **extra) -> Path:
    """Write ``array`` row-major as ``<f8`` bytes plus its descriptor."""
    path = Path(path)
    arr = np.ascontiguousarray(array, dtype="<f8")
    path.write_bytes(arr.tobytes(order="C"))
    lines = [
        f"dims={arr.ndim}",
        "shape=" + ",".join(str(s) for s in arr.shape),
        "dtype=float64",
        "endian=little",
        "order=row-major",
    ]
    lines += [f"{k}={v}" for k, v in extra.items()]
    meta_path(path).write_text("\n".join(lines) + "\n")
    return path


def read_meta(path) -> dict:
    out = {}
    for line in meta_path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ValueError(f"malformed descriptor line {line!r}")
        out[key.strip()] = val.strip()
    return out


def read_raw(path) -> np.ndarray:
    meta = read_meta(path)
    try:
        shape = tuple(int(s) for s in meta["shape"].split(","))
    except KeyError as exc:
        raise ValueError("descriptor lacks a shape entry") from exc
    if meta.get("order", "row-major") != "row-major":
        raise ValueError("only row-major rasters are supported")
    if meta.get("dtype", "float64") != "float64" or meta.get("endian", "little") != "little":
        raise ValueError("only little-endian float64 rasters are supported")
    if "dims" in meta and int(meta["dims"]) != len(shape):
        raise ValueError("dims and shape disagree in descriptor")
    data = np.fromfile(Path(path), dtype="<f8")
    if data.size != int(np.prod(shape)):
        raise ValueError(f"raw file holds {data.size} values, descriptor says {shape}")
    return data.reshape(shape).astype(float)


def subsample_to(array: np.ndarray, shape: tuple) -> np.ndarray:
    """Pick the nodes of ``array`` that coincide with a dyadically coarser node grid."""
    array = np.asarray(array, dtype=float)
    if array.shape == tuple(shape):
        return array
    if array.ndim != len(shape):
        raise ValueError(f"raster of shape {array.shape} cannot map onto {shape}")
    idx = []
    for fine, coarse in zip(array.shape, shape):
        if coarse < 2 or (fine - 1) % (coarse - 1):
            raise ValueError(f"raster of shape {array.shape} is not a refinement of {shape}")
        idx.append(slice(None, None, (fine - 1) // (coarse - 1)))
    return array[tuple(idx)]
