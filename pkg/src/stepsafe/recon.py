"""Region masks, reconstruction metrics, and the region-decoupled hybrid loss.

This module is the numeric oracle for grid reconstruction quality: the
trainer recomputes the same quantities and must agree with it. Gradients are
3x3 Sobel estimates normalized by cell size, so magnitudes read as rise/run
and the operator is exact on linear ramps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULTS
from .errors import ValidationError

_R = DEFAULTS["recon"]

EDGE_THRESH = _R["edge_thresh"]
FLAT_THRESH = _R["flat_thresh"]
BCE_LOGIT_CLAMP = _R["bce_logit_clamp"]


def sobel_components(grid: np.ndarray, resolution: float):
    """Sobel gradient (d/dx, d/dy) with edge-replicated borders."""
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] < 3 or g.shape[1] < 3:
        raise ValidationError("sobel needs a grid of at least 3x3")
    p = np.pad(g, 1, mode="edge")
    inv = 1.0 / (8.0 * resolution)
    # axis 0 is x; kernel [-1 0 1] along x smoothed [1 2 1] along y
    gx = ((p[2:, :-2] - p[:-2, :-2])
          + 2.0 * (p[2:, 1:-1] - p[:-2, 1:-1])
          + (p[2:, 2:] - p[:-2, 2:])) * inv
    gy = ((p[:-2, 2:] - p[:-2, :-2])
          + 2.0 * (p[1:-1, 2:] - p[1:-1, :-2])
          + (p[2:, 2:] - p[2:, :-2])) * inv
    return gx, gy


def sobel_magnitude(grid: np.ndarray, resolution: float) -> np.ndarray:
    gx, gy = sobel_components(grid, resolution)
    return np.hypot(gx, gy)


@dataclass(frozen=True)
class RegionMasks:
    """Edge/flat cell partition derived from the ground-truth grid."""

    m_gt: np.ndarray    # gradient magnitude of the ground truth
    m_edge: np.ndarray  # boolean
    m_flat: np.ndarray  # boolean


def region_masks(gt: np.ndarray, edge_thresh: float = EDGE_THRESH,
                 flat_thresh: float = FLAT_THRESH,
                 resolution: float = DEFAULTS["grid"]["resolution"]) -> RegionMasks:
    """Split cells into edge (steep), flat, and an unlabeled band between."""
    if edge_thresh <= 0 or flat_thresh <= 0:
        raise ValidationError("mask thresholds must be positive")
    if flat_thresh >= edge_thresh:
        raise ValidationError("flat_thresh must be below edge_thresh")
    m_gt = sobel_magnitude(gt, resolution)
    return RegionMasks(m_gt=m_gt, m_edge=m_gt > edge_thresh, m_flat=m_gt < flat_thresh)


@dataclass(frozen=True)
class MetricReport:
    """Reconstruction quality metrics; None where the defining mask is empty."""

    g_mse: float
    e_mae: float | None
    f_mae: float | None
    f_rgh: float | None

    def to_json(self) -> dict:
        return {"g_mse": self.g_mse, "e_mae": self.e_mae,
                "f_mae": self.f_mae, "f_rgh": self.f_rgh}


def metrics(pred: np.ndarray, gt: np.ndarray, masks: RegionMasks,
            resolution: float = DEFAULTS["grid"]["resolution"]) -> MetricReport:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValidationError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    err = pred - gt
    g_mse = float(np.mean(err * err))
    e_mae = float(np.mean(np.abs(err[masks.m_edge]))) if masks.m_edge.any() else None
    f_mae = float(np.mean(np.abs(err[masks.m_flat]))) if masks.m_flat.any() else None
    if masks.m_flat.any():
        f_rgh = float(np.mean(sobel_magnitude(pred, resolution)[masks.m_flat]))
    else:
        f_rgh = None
    return MetricReport(g_mse, e_mae, f_mae, f_rgh)


@dataclass(frozen=True)
class LossWeights:
    lambda_e: float = _R["lambda_e"]
    lambda_r: float = _R["lambda_r"]
    lambda_s: float = _R["lambda_s"]
    lambda_g: float = _R["lambda_g"]
    alpha: float = _R["alpha"]

    def __post_init__(self):
        for name in ("lambda_e", "lambda_r", "lambda_s", "lambda_g", "alpha"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")

    def to_json(self) -> dict:
        return {"lambda_e": self.lambda_e, "lambda_r": self.lambda_r,
                "lambda_s": self.lambda_s, "lambda_g": self.lambda_g,
                "alpha": self.alpha}


@dataclass(frozen=True)
class LossBreakdown:
    l_h: float
    l_e: float
    l_r: float
    l_s: float
    l_g: float
    l_total: float
    m_pred: np.ndarray

    def to_json(self) -> dict:
        return {"l_h": self.l_h, "l_e": self.l_e, "l_r": self.l_r,
                "l_s": self.l_s, "l_g": self.l_g, "l_total": self.l_total}


def adaptive_gradient_term(m_pred: np.ndarray, m_gt: np.ndarray,
                           alpha: float) -> float:
    """Gradient MAE amplified on steep ground-truth cells, over all N cells."""
    return float(np.sum((1.0 + alpha * m_gt) * np.abs(m_pred - m_gt))
                 / m_gt.size)


def _bce_with_logits(logits: np.ndarray, target: np.ndarray, clamp: float) -> float:
    z = np.clip(logits, -clamp, clamp)
    # stable form of softplus(z) - t*z
    per = np.maximum(z, 0.0) - z * target + np.log1p(np.exp(-np.abs(z)))
    return float(np.mean(per))


def hybrid_loss(pred: np.ndarray, edge_logits: np.ndarray, gt: np.ndarray,
                masks: RegionMasks, weights: LossWeights,
                resolution: float = DEFAULTS["grid"]["resolution"]) -> LossBreakdown:
    """Height, edge-classification, and region-specific loss terms.

    l_h   global MSE on heights
    l_e   per-cell BCE of edge logits against the edge mask
    l_r   MAE restricted to edge cells
    l_s   mean |d| + d^2 of first-order forward differences whose both
          endpoints are flat cells (a smoothness prior on the prediction)
    l_g   gradient MAE amplified by (1 + alpha * m_gt), normalized by the
          total cell count
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    edge_logits = np.asarray(edge_logits, dtype=np.float64)
    if pred.shape != gt.shape or edge_logits.shape != gt.shape:
        raise ValidationError("loss inputs must share one shape")
    if not np.all(np.isfinite(edge_logits)):
        raise ValidationError("edge logits must be finite")

    err = pred - gt
    l_h = float(np.mean(err * err))
    l_e = _bce_with_logits(edge_logits, masks.m_edge.astype(np.float64),
                           BCE_LOGIT_CLAMP)
    l_r = float(np.mean(np.abs(err[masks.m_edge]))) if masks.m_edge.any() else 0.0

    dx = pred[1:, :] - pred[:-1, :]
    dy = pred[:, 1:] - pred[:, :-1]
    px = masks.m_flat[1:, :] & masks.m_flat[:-1, :]
    py = masks.m_flat[:, 1:] & masks.m_flat[:, :-1]
    n_pairs = int(px.sum()) + int(py.sum())
    if n_pairs:
        sx = np.abs(dx[px]).sum() + (dx[px] ** 2).sum()
        sy = np.abs(dy[py]).sum() + (dy[py] ** 2).sum()
        l_s = float((sx + sy) / n_pairs)
    else:
        l_s = 0.0

    m_pred = sobel_magnitude(pred, resolution)
    l_g = adaptive_gradient_term(m_pred, masks.m_gt, weights.alpha)

    l_total = (l_h + weights.lambda_e * l_e + weights.lambda_r * l_r
               + weights.lambda_s * l_s + weights.lambda_g * l_g)
    return LossBreakdown(l_h, l_e, l_r, l_s, l_g, l_total, m_pred)
