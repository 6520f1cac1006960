"""Training loop: deterministic per seed, JSONL epoch logs, atomic checkpoints."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from .data import Corpus, load_corpus, split_by_terrain, to_tensors
from .evaluate import corpus_metrics
from .losses import hybrid_loss_terms
from .net import build_net


@dataclass
class TrainConfig:
    base_channels: int = 12
    inject: bool = True
    lr: float = 2e-3
    epochs: int = 40
    batch_size: int = 32
    seed: int = 0
    # loss weights; None entries fall back to the dataset manifest
    weights: dict | None = None

    def resolved_weights(self, corpus: Corpus) -> dict:
        w = dict(corpus.loss_weights)
        if self.weights:
            w.update(self.weights)
        return w


def _select(tensors: dict, mask: np.ndarray) -> dict:
    idx = torch.as_tensor(np.nonzero(mask)[0])
    return {k: v[idx] for k, v in tensors.items()}


def train(dataset_dir, out_dir, cfg: TrainConfig) -> dict:
    """Train on the corpus's train split; returns a summary with val metrics."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = load_corpus(dataset_dir)
    train_mask, val_mask = split_by_terrain(corpus)
    tensors = to_tensors(corpus)
    tr = _select(tensors, train_mask)
    weights = cfg.resolved_weights(corpus)
    res = corpus.resolution

    torch.manual_seed(cfg.seed)
    net = build_net(cfg.base_channels, cfg.inject, seed=cfg.seed)
    opt = torch.optim.Adam(net.parameters(), lr=cfg.lr)
    gen = torch.Generator().manual_seed(cfg.seed + 1)

    n = tr["x"].shape[0]
    log_path = out / "log.jsonl"
    history = []
    with open(log_path, "w") as log:
        for epoch in range(cfg.epochs):
            net.train()
            perm = torch.randperm(n, generator=gen)
            sums = {}
            batches = 0
            for s in range(0, n, cfg.batch_size):
                idx = perm[s:s + cfg.batch_size]
                pred, logits = net(tr["x"][idx])
                terms = hybrid_loss_terms(
                    pred, logits, tr["gt"][idx], tr["m_gt"][idx],
                    tr["m_edge"][idx], tr["m_flat"][idx], weights, res)
                opt.zero_grad()
                terms["total"].backward()
                opt.step()
                for k, v in terms.items():
                    sums[k] = sums.get(k, 0.0) + float(v.detach())
                batches += 1
            row = {"epoch": epoch,
                   **{k: v / batches for k, v in sums.items()}}
            history.append(row["total"])
            log.write(json.dumps(row, sort_keys=True) + "\n")

    val_metrics = evaluate_split(net, corpus, tensors, val_mask)
    summary = {
        "config": asdict(cfg),
        "weights": weights,
        "parameters": net.parameter_count(),
        "train_samples": int(train_mask.sum()),
        "val_samples": int(val_mask.sum()),
        "final_train_total": history[-1] if history else None,
        "val": val_metrics,
    }
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True,
                                                 indent=1))
    save_checkpoint(out / "checkpoint.pt", net, cfg, weights, corpus)
    return summary


@torch.no_grad()
def predict(net, x: torch.Tensor, batch_size: int = 256) -> np.ndarray:
    net.eval()
    outs = []
    for s in range(0, x.shape[0], batch_size):
        pred, _ = net(x[s:s + batch_size])
        outs.append(pred.squeeze(1).cpu().numpy().astype(np.float32))
    return np.concatenate(outs) if outs else np.empty((0,))


def evaluate_split(net, corpus: Corpus, tensors: dict, mask: np.ndarray) -> dict:
    sel = np.nonzero(mask)[0]
    preds = predict(net, tensors["x"][torch.as_tensor(sel)])
    return corpus_metrics(preds, corpus.gt_heights[sel], corpus.m_edge[sel],
                          corpus.m_flat[sel], corpus.resolution)


def save_checkpoint(path, net, cfg: TrainConfig, weights: dict,
                    corpus: Corpus) -> None:
    payload = {
        "state_dict": net.state_dict(),
        "config": asdict(cfg),
        "weights": weights,
        "grid": corpus.manifest["grid"],
    }
    tmp = str(path) + ".tmp"
    torch.save(payload, tmp)
    os.replace(tmp, path)


def load_checkpoint(path):
    payload = torch.load(path, map_location="cpu", weights_only=False)
    cfg = TrainConfig(**payload["config"])
    net = build_net(cfg.base_channels, cfg.inject)
    net.load_state_dict(payload["state_dict"])
    net.eval()
    return net, cfg, payload
