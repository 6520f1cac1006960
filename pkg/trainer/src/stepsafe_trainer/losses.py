"""Region-decoupled hybrid loss, differentiable mirror of the scoring oracle.

Definitions match the dataset producer's loss conventions exactly: Sobel
normalized by 8*resolution with replicated borders, logits clamped to +/-15
for the BCE, per-sample reductions averaged over the batch, smoothness pairs
masked to both-flat endpoints, and the adaptive gradient term normalized by
the full cell count.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F

LOGIT_CLAMP = 15.0

_KX = torch.tensor([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])


def sobel_magnitude(grid: torch.Tensor, resolution: float) -> torch.Tensor:
    """(B, 1, H, W) height grids -> gradient magnitude, rise/run units."""
    k = (1.0 / (8.0 * resolution))
    ky = (_KX * k).to(grid.dtype).to(grid.device)  # differentiates axis 1
    kx = ky.t().contiguous()                       # differentiates axis 0
    w = torch.stack([kx, ky]).unsqueeze(1)  # (2, 1, 3, 3)
    p = F.pad(grid, (1, 1, 1, 1), mode="replicate")
    g = F.conv2d(p, w)
    return torch.hypot(g[:, 0:1], g[:, 1:2])


def _per_sample_mean(values: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Masked per-sample mean; samples with an empty mask contribute zero."""
    m = mask.to(values.dtype)
    total = (values * m).sum(dim=(1, 2, 3))
    count = m.sum(dim=(1, 2, 3))
    return total / count.clamp(min=1.0)


def hybrid_loss_terms(pred, edge_logits, gt, m_gt, m_edge, m_flat,
                      weights: dict, resolution: float) -> dict:
    """Per-term batch means; ``total`` is the weighted sum of the means."""
    err = pred - gt
    l_h = (err * err).mean(dim=(1, 2, 3))

    z = edge_logits.clamp(-LOGIT_CLAMP, LOGIT_CLAMP)
    t = m_edge.to(pred.dtype)
    bce = torch.clamp(z, min=0.0) - z * t + torch.log1p(torch.exp(-z.abs()))
    l_e = bce.mean(dim=(1, 2, 3))

    l_r = _per_sample_mean(err.abs(), m_edge)

    dx = pred[:, :, 1:, :] - pred[:, :, :-1, :]
    dy = pred[:, :, :, 1:] - pred[:, :, :, :-1]
    px = (m_flat[:, :, 1:, :] & m_flat[:, :, :-1, :]).to(pred.dtype)
    py = (m_flat[:, :, :, 1:] & m_flat[:, :, :, :-1]).to(pred.dtype)
    sx = ((dx.abs() + dx * dx) * px).sum(dim=(1, 2, 3))
    sy = ((dy.abs() + dy * dy) * py).sum(dim=(1, 2, 3))
    pairs = px.sum(dim=(1, 2, 3)) + py.sum(dim=(1, 2, 3))
    l_s = (sx + sy) / pairs.clamp(min=1.0)

    m_pred = sobel_magnitude(pred, resolution)
    n_cells = float(pred.shape[2] * pred.shape[3])
    l_g = ((1.0 + weights["alpha"] * m_gt) * (m_pred - m_gt).abs()
           ).sum(dim=(1, 2, 3)) / n_cells

    total = (l_h + weights["lambda_e"] * l_e + weights["lambda_r"] * l_r
             + weights["lambda_s"] * l_s + weights["lambda_g"] * l_g)
    return {
        "l_h": l_h.mean(), "l_e": l_e.mean(), "l_r": l_r.mean(),
        "l_s": l_s.mean(), "l_g": l_g.mean(), "total": total.mean(),
    }
