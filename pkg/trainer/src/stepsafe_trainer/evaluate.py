"""Corpus-level reconstruction metrics.

Cell-pooled over the evaluated subset, mirroring the scorer's aggregation
rule exactly: total absolute/squared error divided by the total cell count
of the defining mask, computed in float64.
"""

from __future__ import annotations

import numpy as np

_SOBEL = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])


def sobel_magnitude_np(grid: np.ndarray, resolution: float) -> np.ndarray:
    p = np.pad(grid, 1, mode="edge")
    inv = 1.0 / (8.0 * resolution)
    gx = ((p[2:, :-2] - p[:-2, :-2]) + 2.0 * (p[2:, 1:-1] - p[:-2, 1:-1])
          + (p[2:, 2:] - p[:-2, 2:])) * inv
    gy = ((p[:-2, 2:] - p[:-2, :-2]) + 2.0 * (p[1:-1, 2:] - p[1:-1, :-2])
          + (p[2:, 2:] - p[2:, :-2])) * inv
    return np.hypot(gx, gy)


def corpus_metrics(preds: np.ndarray, gt: np.ndarray, m_edge: np.ndarray,
                   m_flat: np.ndarray, resolution: float) -> dict:
    sq = abs_e = abs_f = rgh = 0.0
    cells = edge_n = flat_n = 0
    for k in range(preds.shape[0]):
        p = preds[k].astype(np.float64)
        g = gt[k].astype(np.float64)
        err = p - g
        sq += float((err * err).sum())
        cells += err.size
        me, mf = m_edge[k], m_flat[k]
        if me.any():
            abs_e += float(np.abs(err[me]).sum())
            edge_n += int(me.sum())
        if mf.any():
            abs_f += float(np.abs(err[mf]).sum())
            rgh += float(sobel_magnitude_np(p, resolution)[mf].sum())
            flat_n += int(mf.sum())
    return {
        "count": int(preds.shape[0]),
        "g_mse": sq / cells,
        "e_mae": abs_e / edge_n if edge_n else None,
        "f_mae": abs_f / flat_n if flat_n else None,
        "f_rgh": rgh / flat_n if flat_n else None,
        "edge_cells": edge_n,
        "flat_cells": flat_n,
    }
