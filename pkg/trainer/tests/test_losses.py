import numpy as np
import pytest
import torch

# the scoring package is a test-only dependency used as the reference oracle
from stepsafe.recon import LossWeights, hybrid_loss, region_masks
from stepsafe.recon import sobel_magnitude as sobel_np

from stepsafe_trainer.losses import hybrid_loss_terms, sobel_magnitude

RES = 0.05
W = LossWeights().to_json()  # the oracle's configured defaults


def _random_batch(rng, b=6):
    gts = rng.normal(0, 0.3, (b, 28, 20))
    preds = gts + rng.normal(0, 0.05, (b, 28, 20))
    logits = rng.normal(0, 5, (b, 28, 20))
    masks = [region_masks(g, 1.0, 0.3, resolution=RES) for g in gts]
    return gts, preds, logits, masks


def _tensors(gts, preds, logits, masks, dtype=torch.float32):
    t = lambda a: torch.as_tensor(np.stack(a), dtype=dtype).unsqueeze(1)
    return dict(
        pred=t(preds), edge_logits=t(logits), gt=t(gts),
        m_gt=t([m.m_gt for m in masks]),
        m_edge=torch.as_tensor(np.stack([m.m_edge for m in masks])).unsqueeze(1),
        m_flat=torch.as_tensor(np.stack([m.m_flat for m in masks])).unsqueeze(1),
    )


def test_sobel_matches_oracle():
    rng = np.random.default_rng(0)
    g = rng.normal(0, 0.3, (28, 20))
    want = sobel_np(g, RES)
    got = sobel_magnitude(torch.as_tensor(g, dtype=torch.float64)
                          .reshape(1, 1, 28, 20), RES)
    assert np.allclose(got.squeeze().numpy(), want, atol=1e-12)


def test_batch_loss_matches_oracle_mean():
    rng = np.random.default_rng(1)
    for trial in range(10):
        gts, preds, logits, masks = _random_batch(rng)
        want = np.mean([hybrid_loss(p, l, g, m, LossWeights(), resolution=RES)
                        .l_total
                        for p, l, g, m in zip(preds, logits, gts, masks)])
        terms = hybrid_loss_terms(**_tensors(gts, preds, logits, masks),
                                  weights=W, resolution=RES)
        assert float(terms["total"]) == pytest.approx(want, abs=1e-5)


def test_per_term_parity():
    rng = np.random.default_rng(2)
    gts, preds, logits, masks = _random_batch(rng, b=4)
    oracle = [hybrid_loss(p, l, g, m, LossWeights(), resolution=RES)
              for p, l, g, m in zip(preds, logits, gts, masks)]
    terms = hybrid_loss_terms(**_tensors(gts, preds, logits, masks,
                                         dtype=torch.float64),
                              weights=W, resolution=RES)
    for name, key in (("l_h", "l_h"), ("l_e", "l_e"), ("l_r", "l_r"),
                      ("l_s", "l_s"), ("l_g", "l_g")):
        want = np.mean([getattr(o, name) for o in oracle])
        assert float(terms[key]) == pytest.approx(want, abs=1e-12), name


def test_empty_edge_mask_contributes_zero():
    b = 2
    gts = np.zeros((b, 28, 20))
    preds = gts + 0.1
    logits = np.full((b, 28, 20), -15.0)
    masks = [region_masks(g, 1.0, 0.3, resolution=RES) for g in gts]
    terms = hybrid_loss_terms(**_tensors(gts, preds, logits, masks),
                              weights=W, resolution=RES)
    assert float(terms["l_r"]) == 0.0


def test_loss_differentiable():
    rng = np.random.default_rng(3)
    gts, preds, logits, masks = _random_batch(rng, b=2)
    t = _tensors(gts, preds, logits, masks)
    t["pred"].requires_grad_(True)
    t["edge_logits"].requires_grad_(True)
    terms = hybrid_loss_terms(**t, weights=W, resolution=RES)
    terms["total"].backward()
    assert t["pred"].grad is not None and t["pred"].grad.abs().max() > 0
    assert t["edge_logits"].grad.abs().max() > 0
