"""Trainer command line: train, export, ablate."""

from __future__ import annotations

import argparse
import json
import sys

from .ablate import run_ablation
from .export import export_predictions
from .train import TrainConfig, train


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="stepsafe-train")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one configuration")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--base-channels", type=int, default=12)
    p.add_argument("--lr", type=float, default=2e-3)
    p.add_argument("--no-inject", action="store_true")
    p.add_argument("--weights-json", default=None,
                   help="JSON object overriding manifest loss weights")

    p = sub.add_parser("export", help="export predictions for a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--pred", required=True, help="output blob prefix")

    p = sub.add_parser("ablate", help="run the loss/injection ablation grid")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--base-channels", type=int, default=12)

    args = ap.parse_args(argv)
    if args.command == "train":
        weights = json.loads(args.weights_json) if args.weights_json else None
        cfg = TrainConfig(base_channels=args.base_channels, lr=args.lr,
                          epochs=args.epochs, seed=args.seed,
                          inject=not args.no_inject, weights=weights)
        summary = train(args.dataset, args.out, cfg)
        print(json.dumps(summary["val"], sort_keys=True))
    elif args.command == "export":
        export_predictions(args.checkpoint, args.dataset, args.pred)
    else:
        seeds = tuple(int(s) for s in args.seeds.split(","))
        report = run_ablation(args.dataset, args.out, seeds=seeds,
                              epochs=args.epochs,
                              base_channels=args.base_channels)
        print(json.dumps(report["verdicts"], sort_keys=True, indent=1))
    return 0


if __name__ == "__main__":
    sys.exit(main())
