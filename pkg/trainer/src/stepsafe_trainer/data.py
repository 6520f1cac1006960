"""Reader for the stepsafe dataset interchange format.

Implemented against the documented byte layout (manifest.json + tensors.bin
of fixed-size little-endian records), independent of the producing package.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

SUPPORTED_VERSION = 1


class DatasetError(RuntimeError):
    pass


@dataclass
class Corpus:
    input_heights: np.ndarray  # (N, nx, ny) float32, NaN sentinel
    input_valid: np.ndarray    # (N, nx, ny) bool
    gt_heights: np.ndarray     # (N, nx, ny) float32
    m_gt: np.ndarray           # (N, nx, ny) float32
    m_edge: np.ndarray         # (N, nx, ny) bool
    m_flat: np.ndarray         # (N, nx, ny) bool
    metas: list
    manifest: dict

    def __len__(self):
        return self.input_heights.shape[0]

    @property
    def resolution(self) -> float:
        return float(self.manifest["grid"]["resolution"])

    @property
    def loss_weights(self) -> dict:
        return dict(self.manifest["loss_weights"])


def load_corpus(path) -> Corpus:
    path = Path(path)
    man = json.loads((path / "manifest.json").read_text())
    if man.get("format") != "stepsafe-dataset":
        raise DatasetError("not a stepsafe dataset")
    if man.get("version") != SUPPORTED_VERSION:
        raise DatasetError(f"unsupported dataset version {man.get('version')}")
    shape = tuple(man["grid"]["shape"])
    cells = shape[0] * shape[1]
    count = man["sample_count"]
    rec = man["record_size"]

    blob = (path / "tensors.bin").read_bytes()
    if len(blob) != count * rec:
        raise DatasetError("payload size does not match the manifest")
    if hashlib.sha256(blob).hexdigest() != man["tensors_sha256"]:
        raise DatasetError("payload checksum mismatch")

    f4, u1 = 4 * cells, cells
    fields = {k: [] for k in ("ih", "iv", "gt", "mg", "me", "mf")}
    for k in range(count):
        o = man["offsets"][k]
        fields["ih"].append(np.frombuffer(blob, "<f4", cells, o)); o += f4
        fields["iv"].append(np.frombuffer(blob, np.uint8, cells, o)); o += u1
        fields["gt"].append(np.frombuffer(blob, "<f4", cells, o)); o += f4
        fields["mg"].append(np.frombuffer(blob, "<f4", cells, o)); o += f4
        fields["me"].append(np.frombuffer(blob, np.uint8, cells, o)); o += u1
        fields["mf"].append(np.frombuffer(blob, np.uint8, cells, o))

    def stack(key, dtype=None, boolean=False):
        arr = np.stack(fields[key]).reshape(count, *shape)
        return arr.astype(bool) if boolean else arr.copy()

    return Corpus(
        input_heights=stack("ih"),
        input_valid=stack("iv", boolean=True),
        gt_heights=stack("gt"),
        m_gt=stack("mg"),
        m_edge=stack("me", boolean=True),
        m_flat=stack("mf", boolean=True),
        metas=man["samples"],
        manifest=man,
    )


def split_by_terrain(corpus: Corpus, val_every: int = 4):
    """Train/val boolean masks split on terrain seeds, never on frames."""
    keys = [tuple(m.get("terrain_seed", [i])) for i, m in enumerate(corpus.metas)]
    uniq = sorted(set(keys))
    val_keys = set(uniq[val_every - 1::val_every])
    val = np.array([k in val_keys for k in keys])
    if not val.any() or val.all():
        raise DatasetError("degenerate train/val split; corpus too small")
    return ~val, val


def to_tensors(corpus: Corpus, device="cpu", dtype=torch.float32):
    """Model-ready tensors: inputs are (N, 2, nx, ny) with holes zeroed."""
    heights = np.nan_to_num(corpus.input_heights, nan=0.0)
    x = np.stack([heights, corpus.input_valid.astype(np.float32)], axis=1)
    return {
        "x": torch.as_tensor(x, dtype=dtype, device=device),
        "gt": torch.as_tensor(corpus.gt_heights, dtype=dtype,
                              device=device).unsqueeze(1),
        "m_gt": torch.as_tensor(corpus.m_gt, dtype=dtype,
                                device=device).unsqueeze(1),
        "m_edge": torch.as_tensor(corpus.m_edge, device=device).unsqueeze(1),
        "m_flat": torch.as_tensor(corpus.m_flat, device=device).unsqueeze(1),
    }
