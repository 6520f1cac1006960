"""Ablation harness: loss-term and injection comparisons on one corpus.

Five configurations share the encoder/decoder sizing and differ only in the
active loss terms or the edge-feature injection:

    base          l_h + l_e only
    r             + edge-region L1
    rs            + flat-region smoothness
    full          + adaptive gradient term
    full_noinject full losses, injection ablated (late-branching baseline)

Each runs over several seeds on the same train/val split; directional
comparisons are decided by majority across seeds.
"""

from __future__ import annotations

import json
from pathlib import Path

from .train import TrainConfig, train

# overrides zero out terms; non-zeroed weights come from the dataset manifest
CONFIGS = {
    "base": {"weights": {"lambda_r": 0.0, "lambda_s": 0.0, "lambda_g": 0.0},
             "inject": True},
    "r": {"weights": {"lambda_s": 0.0, "lambda_g": 0.0}, "inject": True},
    "rs": {"weights": {"lambda_g": 0.0}, "inject": True},
    "full": {"weights": None, "inject": True},
    "full_noinject": {"weights": None, "inject": False},
}

COMPARISONS = (
    # name, metric, lower side, higher side
    ("full_loss_beats_base_emae", "e_mae", "full", "base"),
    ("smoothness_reduces_frgh", "f_rgh", "rs", "r"),
    ("injection_beats_late_branching_emae", "e_mae", "full", "full_noinject"),
)


def run_ablation(dataset_dir, out_dir, seeds=(0, 1, 2), epochs: int = 60,
                 base_channels: int = 8, lr: float = 3e-3,
                 batch_size: int = 64) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = {}
    for name, spec in CONFIGS.items():
        results[name] = {}
        for seed in seeds:
            cfg = TrainConfig(base_channels=base_channels, lr=lr,
                              epochs=epochs, batch_size=batch_size, seed=seed,
                              inject=spec["inject"], weights=spec["weights"])
            summary = train(dataset_dir, out / f"{name}_s{seed}", cfg)
            results[name][str(seed)] = summary["val"]

    verdicts = {}
    for cname, metric, low, high in COMPARISONS:
        wins = []
        for seed in seeds:
            a = results[low][str(seed)][metric]
            b = results[high][str(seed)][metric]
            wins.append(bool(a < b))
        verdicts[cname] = {
            "metric": metric,
            "lower": low,
            "higher": high,
            "per_seed": {str(s): {"lower": results[low][str(s)][metric],
                                  "higher": results[high][str(s)][metric],
                                  "holds": w}
                         for s, w in zip(seeds, wins)},
            "majority_holds": sum(wins) * 2 > len(wins),
        }

    report = {"results": results, "verdicts": verdicts,
              "seeds": list(seeds), "epochs": epochs}
    (out / "results.json").write_text(json.dumps(report, sort_keys=True,
                                                 indent=1))
    return report
