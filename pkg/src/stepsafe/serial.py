"""Byte-level interchange helpers: blobs, manifests, PGM, CSV.

Everything written here is deterministic for fixed inputs: manifests are
canonical JSON (sorted keys, fixed separators), tensors are raw little-endian
arrays, and checksums are SHA-256 of the exact payload bytes.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, separators=(",", ": "))


def write_json(path, obj) -> None:
    Path(path).write_text(canonical_json(obj) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def f32_bytes(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()


def u8_bytes(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype=np.uint8).tobytes()


def f32_from(buf: bytes, shape) -> np.ndarray:
    return np.frombuffer(buf, dtype="<f4").reshape(shape).copy()


def u8_from(buf: bytes, shape) -> np.ndarray:
    return np.frombuffer(buf, dtype=np.uint8).reshape(shape).copy()


def write_pgm(path, grid: np.ndarray, vmin: float | None = None,
              vmax: float | None = None) -> None:
    """ASCII (P2) grayscale image of a 2D field; NaN renders as 0."""
    g = np.asarray(grid, dtype=float)
    finite = np.isfinite(g)
    if vmin is None:
        vmin = float(g[finite].min()) if finite.any() else 0.0
    if vmax is None:
        vmax = float(g[finite].max()) if finite.any() else 1.0
    span = vmax - vmin
    if span <= 0:
        span = 1.0
    levels = np.zeros(g.shape, dtype=int)
    levels[finite] = np.clip(
        np.rint((g[finite] - vmin) / span * 255.0), 0, 255).astype(int)
    rows, cols = g.shape
    lines = ["P2", f"{cols} {rows}", "255"]
    for r in range(rows):
        lines.append(" ".join(str(v) for v in levels[r]))
    Path(path).write_text("\n".join(lines) + "\n")


def write_csv(path, header: list[str], columns: list[np.ndarray]) -> None:
    rows = [",".join(header)]
    n = len(columns[0])
    for i in range(n):
        rows.append(",".join(repr(float(c[i])) for c in columns))
    Path(path).write_text("\n".join(rows) + "\n")


def write_jsonl(path, records) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_jsonl(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


# prediction blob: manifest + packed little-endian float32 grids

def write_predictions(prefix, preds: np.ndarray) -> None:
    """(N, nx, ny) height grids in dataset order."""
    prefix = Path(prefix)
    preds = np.asarray(preds)
    payload = f32_bytes(preds)
    Path(str(prefix) + ".bin").write_bytes(payload)
    write_json(str(prefix) + ".json", {
        "format": "stepsafe-predictions",
        "version": 1,
        "count": int(preds.shape[0]),
        "shape": list(preds.shape[1:]),
        "dtype": "<f4",
        "sha256": sha256_bytes(payload),
    })


def read_predictions(prefix) -> np.ndarray:
    man = read_json(str(prefix) + ".json")
    buf = Path(str(prefix) + ".bin").read_bytes()
    return f32_from(buf, (man["count"], *man["shape"]))


# point-cloud blob: manifest + packed little-endian float32 triples

def write_cloud(prefix, xyz: np.ndarray, frame: str = "odometry") -> None:
    prefix = Path(prefix)
    payload = f32_bytes(np.asarray(xyz).reshape(-1, 3))
    prefix.with_suffix(".bin").write_bytes(payload)
    write_json(prefix.with_suffix(".json"), {
        "format": "stepsafe-cloud",
        "version": 1,
        "count": int(np.asarray(xyz).reshape(-1, 3).shape[0]),
        "fields": ["x", "y", "z"],
        "dtype": "<f4",
        "frame": frame,
        "sha256": sha256_bytes(payload),
    })


def read_cloud(prefix) -> np.ndarray:
    prefix = Path(prefix)
    man = read_json(prefix.with_suffix(".json"))
    buf = prefix.with_suffix(".bin").read_bytes()
    return f32_from(buf, (man["count"], 3))
