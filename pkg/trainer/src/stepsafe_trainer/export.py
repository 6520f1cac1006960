"""Prediction export in the scorer's blob format (json manifest + f32 bin)."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .data import load_corpus, to_tensors
from .train import load_checkpoint, predict


def write_prediction_blob(prefix, preds: np.ndarray) -> None:
    prefix = Path(prefix)
    payload = np.ascontiguousarray(preds, dtype="<f4").tobytes()
    Path(str(prefix) + ".bin").write_bytes(payload)
    man = {
        "format": "stepsafe-predictions",
        "version": 1,
        "count": int(preds.shape[0]),
        "shape": list(preds.shape[1:]),
        "dtype": "<f4",
        "sha256": hashlib.sha256(payload).hexdigest(),
    }
    Path(str(prefix) + ".json").write_text(
        json.dumps(man, sort_keys=True, indent=1) + "\n")


def export_predictions(checkpoint_path, dataset_dir, prefix) -> np.ndarray:
    """Run the checkpoint over the dataset in manifest order and export."""
    net, _, payload = load_checkpoint(checkpoint_path)
    corpus = load_corpus(dataset_dir)
    if list(payload["grid"]["shape"]) != list(corpus.manifest["grid"]["shape"]):
        raise ValueError("checkpoint grid shape does not match the dataset")
    tensors = to_tensors(corpus)
    preds = predict(net, tensors["x"])
    write_prediction_blob(prefix, preds)
    return preds
