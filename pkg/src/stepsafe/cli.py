"""Command-line surface: terrain, simulate, dataset, penalty, eval.

Every subcommand is deterministic given its arguments and seed, and writes a
``run_manifest.json`` echoing the fully resolved configuration. The timing
report of ``simulate`` is the one exception to byte-identical reruns: it
measures wall-clock latency.

Exit codes: 0 success, 2 validation error, 3 I/O error, 4 file-format error.
The STEPSAFE_OUT environment variable, when set, is the root for relative
output paths.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .backend import backend_name
from .config import CONFIG_VERSION, DEFAULTS
from .dataset import (DatasetFormatError, LossWeights, generate_corpus,
                      read_dataset, simulate_run, write_dataset, TrajectorySpec)
from .errors import StepsafeError, ValidationError
from .geometry import Pose
from .lidar import RayDropParams, SensorModel
from .mapping import extract_local_grid, save_map
from .penalty import FootTemplate, PenaltyParams, penalty_field
from .recon import metrics as recon_metrics
from .serial import (f32_bytes, f32_from, read_json, sha256_bytes, u8_bytes,
                     write_csv, write_json, write_jsonl, write_pgm)
from .terrain import TerrainSpec, make_terrain, sample_curriculum

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_FORMAT = 4


def _out_dir(raw: str) -> Path:
    p = Path(raw)
    root = os.environ.get("STEPSAFE_OUT")
    if root and not p.is_absolute():
        p = Path(root) / p
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_manifest(out: Path, command: str, resolved: dict) -> None:
    write_json(out / "run_manifest.json", {
        "tool": "stepsafe",
        "tool_version": __version__,
        "config_version": CONFIG_VERSION,
        "backend": backend_name(),
        "command": command,
        "resolved": resolved,
    })


def _terrain_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", default="stairs_up",
                   choices=["stairs_up", "stairs_down", "slope_up",
                            "slope_down", "flat"])
    p.add_argument("--tread", type=float, default=0.30,
                   help="stair tread depth [m]")
    p.add_argument("--rise", type=float, default=0.15,
                   help="stair step height [m]")
    p.add_argument("--angle", type=float, default=0.2, help="slope angle [rad]")
    p.add_argument("--yaw", type=float, default=0.0,
                   help="traversal axis yaw [rad]")
    p.add_argument("--level", type=int, default=None,
                   help="sample a curriculum spec at this level instead")
    p.add_argument("--seed", type=int, default=0)


def _spec_from_args(args) -> TerrainSpec:
    if args.level is not None:
        return sample_curriculum(args.level, args.seed)
    return TerrainSpec(kind=args.kind, tread_depth=args.tread,
                       step_height=args.rise, slope_angle=args.angle,
                       yaw=args.yaw)


def _sensor_from_args(args) -> SensorModel:
    drop = RayDropParams(base_drop_prob=args.base_drop)
    return SensorModel(n_azimuth=args.n_azimuth, n_elevation=args.n_elevation,
                       range_noise_std=args.noise_std, drop=drop)


def _sensor_args(p: argparse.ArgumentParser) -> None:
    s = DEFAULTS["sensor"]
    p.add_argument("--n-azimuth", type=int, default=s["n_azimuth"])
    p.add_argument("--n-elevation", type=int, default=s["n_elevation"])
    p.add_argument("--noise-std", type=float, default=s["range_noise_std"])
    p.add_argument("--base-drop", type=float,
                   default=DEFAULTS["ray_drop"]["base_drop_prob"])
    p.add_argument("--no-drop", action="store_true",
                   help="disable the gradient-conditioned ray drop")


# ---------------------------------------------------------------- terrain

def cmd_terrain(args) -> int:
    out = _out_dir(args.out)
    spec = _spec_from_args(args)
    field = make_terrain(spec)
    write_json(out / "spec.json", spec.to_json())
    xs = np.linspace(-0.5 * field.extent_x + 0.05, 0.5 * field.extent_x - 0.05, 160)
    ys = np.linspace(-0.5 * field.extent_y + 0.05, 0.5 * field.extent_y - 0.05, 160)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    write_pgm(out / "preview.pgm", field.heights_unchecked(gx, gy))
    _write_manifest(out, "terrain", {"spec": spec.to_json(), "seed": args.seed,
                                     "level": args.level})
    return EXIT_OK


# ---------------------------------------------------------------- simulate

def _scenario_trajectory(args, field) -> tuple[TrajectorySpec, float]:
    """Returns the trajectory and the dwell start time (NaN if no dwell)."""
    h = args.base_height

    def wp(x, y, t, yaw=0.0):
        z = float(field.heights_unchecked(x, y)) + h
        return (Pose.from_yaw(x, y, z, yaw), t)

    if args.scenario == "line":
        half = 0.5 * args.speed * args.duration
        n = max(2, int(args.duration / 0.25))
        wps = [wp(-half + args.speed * k * args.duration / n, 0.0,
                  k * args.duration / n) for k in range(n + 1)]
        return TrajectorySpec(wps, fuse_rate=args.fuse_hz,
                              extract_rate=args.extract_hz), float("nan")
    if args.scenario == "dwell":
        lead = 4.0
        reach = 1.5
        wps = []
        n = 16
        for k in range(n + 1):  # out and back at constant speed
            t = lead * k / n
            x = reach * (1.0 - abs(2.0 * k / n - 1.0))
            wps.append(wp(x, 0.0, t))
        wps.append(wp(0.0, 0.0, lead + args.duration))
        return TrajectorySpec(wps, fuse_rate=args.fuse_hz,
                              extract_rate=args.extract_hz), lead
    raise ValidationError(f"unknown scenario {args.scenario!r}")


def _bench_cloud(field, n: int) -> np.ndarray:
    """n points at voxel centers, one per voxel, packed in a disc at origin.

    The disc keeps every point inside the default roll radius so a bench map
    really holds n points after fusion.
    """
    if n <= 0:
        return np.empty((0, 3))
    vox = DEFAULTS["map"]["voxel_size"]
    r_cells = int(math.ceil(math.sqrt(n / math.pi))) + 2
    ks = np.arange(-r_cells, r_cells + 1)
    coords = (ks + 0.5) * vox  # mid-voxel, robust to floor() rounding
    gx, gy = np.meshgrid(coords, coords, indexing="ij")
    xs, ys = gx.ravel(), gy.ravel()
    dist = np.hypot(xs, ys)
    order = np.lexsort((ys, xs, dist))[:n]
    xs, ys = xs[order], ys[order]
    zs = field.heights_unchecked(xs, ys)
    return np.stack([xs, ys, zs], axis=-1)


def _zone_report(g0, g1, final_map, dwell_start: float, zone_radius: float):
    """Retention accounting for the dwell scenario, from base-centered grids.

    Cells are classified by whether their full footprint lies inside or
    outside the protection cylinder; the one-cell band straddling the radius
    holds a mix of protected and decaying points and is excluded.
    """
    from .mapping import GlobalMap, StampedCloud

    cx, cy = g0.cell_centers()
    dist = np.hypot(cx, cy)
    half_diag = 0.5 * math.sqrt(2.0) * g0.resolution
    zone_cells = dist <= zone_radius - half_diag
    outside_cells = dist >= zone_radius + half_diag

    # cells freshly covered during the dwell, from surviving non-zone points
    pose = g1.pose
    fresh = final_map.cloud.times >= dwell_start + 1e-9
    pts = final_map.cloud.xyz[fresh]
    pxy = pts[:, :2] - np.array([pose.position[0], pose.position[1]])
    outside_zone = np.hypot(pxy[:, 0], pxy[:, 1]) > zone_radius
    covered = np.zeros(g0.shape, dtype=bool)
    if outside_zone.any():
        probe_cloud = StampedCloud(pts[outside_zone],
                                   final_map.cloud.confidence[fresh][outside_zone],
                                   final_map.cloud.times[fresh][outside_zone])
        covered = extract_local_grid(GlobalMap(probe_cloud), pose).valid

    zone_valid0 = zone_cells & g0.valid
    retained = zone_valid0 & g1.valid
    outside0 = g0.valid & outside_cells & ~covered
    expired = outside0 & ~g1.valid
    return {
        "zone_cells_valid_at_start": int(zone_valid0.sum()),
        "zone_cells_retained": int(retained.sum()),
        "zone_retention": (float(retained.sum() / zone_valid0.sum())
                           if zone_valid0.any() else None),
        "uncovered_outside_cells": int(outside0.sum()),
        "uncovered_outside_expired": int(expired.sum()),
        "outside_expiry": (float(expired.sum() / outside0.sum())
                           if outside0.any() else None),
    }


def cmd_simulate(args) -> int:
    out = _out_dir(args.out)
    spec = _spec_from_args(args)
    field = make_terrain(spec)
    sensor = _sensor_from_args(args)
    traj, dwell_start = _scenario_trajectory(args, field)

    map_params = {"t_decay": args.t_decay}
    prep = _bench_cloud(field, args.bench_points) if args.bench_points else None

    latencies = []
    fusions = extractions = 0
    g0 = g1 = None
    final_map = None
    grids = []
    for ev in simulate_run(field, traj, sensor, args.seed,
                           map_params=map_params, zone_radius=args.zone_radius,
                           drop=not args.no_drop,
                           pose_jitter_std=args.pose_jitter,
                           prepopulate=prep):
        final_map = ev.map
        if ev.kind == "fuse":
            fusions += 1
            continue
        extractions += 1
        t0 = time.perf_counter()
        extract_local_grid(ev.map, ev.grid.pose)
        latencies.append(time.perf_counter() - t0)
        grids.append(ev)
        if not math.isnan(dwell_start) and ev.t >= dwell_start and g0 is None:
            g0 = ev.grid
        g1 = ev.grid

    payload = bytearray()
    for ev in grids:
        payload.extend(f32_bytes(ev.grid.heights))
        payload.extend(u8_bytes(ev.grid.valid))
    (out / "grids.bin").write_bytes(bytes(payload))
    write_json(out / "grids.json", {
        "format": "stepsafe-grids", "version": 1,
        "count": extractions, "shape": list(DEFAULTS["grid"]["shape"]),
        "times": [ev.t for ev in grids],
        "sha256": sha256_bytes(bytes(payload)),
    })
    save_map(out / "map", final_map)

    lat = np.array(latencies) * 1e3 if latencies else np.array([0.0])
    write_json(out / "timing.json", {
        "extractions": extractions,
        "fusions": fusions,
        "map_points": final_map.n_points,
        "latency_ms": {
            "mean": float(lat.mean()),
            "p50": float(np.percentile(lat, 50)),
            "p99": float(np.percentile(lat, 99)),
            "max": float(lat.max()),
        },
    })
    if g0 is not None:
        write_json(out / "zone_report.json",
                   _zone_report(g0, g1, final_map, dwell_start, args.zone_radius))

    _write_manifest(out, "simulate", {
        "spec": spec.to_json(), "scenario": args.scenario,
        "duration": args.duration, "seed": args.seed,
        "fuse_hz": args.fuse_hz, "extract_hz": args.extract_hz,
        "bench_points": args.bench_points, "drop": not args.no_drop,
        "pose_jitter": args.pose_jitter,
        "t_decay": args.t_decay, "zone_radius": args.zone_radius,
        "fusions": fusions, "extractions": extractions,
    })
    return EXIT_OK


# ---------------------------------------------------------------- dataset

def cmd_dataset(args) -> int:
    out = _out_dir(args.out)
    sensor = _sensor_from_args(args)
    levels = [int(v) for v in args.levels.split(",")] if args.levels else None
    samples = generate_corpus(args.samples, args.seed, sensor=sensor,
                              drop=not args.no_drop,
                              kinds=args.kinds.split(",") if args.kinds else None,
                              levels=levels,
                              samples_per_run=args.samples_per_run)
    write_dataset(samples, out, seed=args.seed, loss_weights=LossWeights())
    _write_manifest(out, "dataset", {
        "samples": args.samples, "seed": args.seed, "drop": not args.no_drop,
        "kinds": args.kinds, "levels": args.levels,
        "samples_per_run": args.samples_per_run,
    })
    return EXIT_OK


# ---------------------------------------------------------------- penalty

def cmd_penalty(args) -> int:
    out = _out_dir(args.out)
    spec = _spec_from_args(args)
    field = make_terrain(spec)
    params = PenaltyParams()
    template = FootTemplate(d_z=args.dz, heading=args.heading)
    xs = np.arange(args.x0, args.x1 + 1e-9, args.step)
    ys = np.arange(args.y0, args.y1 + 1e-9, args.step)
    fields = penalty_field(field, (args.vx, args.vy), template, params, xs, ys)

    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    write_csv(out / "sweep.csv",
              ["x", "y", "r_colli", "r_edge", "r_safe"],
              [gx.ravel(), gy.ravel(), fields["r_colli"].ravel(),
               fields["r_edge"].ravel(), fields["r_safe"].ravel()])
    write_pgm(out / "heatmap.pgm", fields["r_safe"])
    _write_manifest(out, "penalty", {
        "spec": spec.to_json(), "v_cmd": [args.vx, args.vy],
        "d_z": args.dz, "heading": args.heading,
        "region": [args.x0, args.x1, args.y0, args.y1, args.step],
        "params": {"d_unsafe": params.d_unsafe, "eps_slope": params.eps_slope,
                   "d_min": params.d_min, "w1": params.w1, "w2": params.w2,
                   "cone_apex_angle": params.cone_apex_angle,
                   "edge_grad_threshold": params.edge_grad_threshold,
                   "riser_margin": params.riser_margin},
    })
    return EXIT_OK


# ---------------------------------------------------------------- eval

def aggregate_metrics(preds: np.ndarray, samples) -> dict:
    """Corpus-level cell-pooled metrics; the trainer mirrors this rule."""
    from .recon import sobel_magnitude

    sq = abs_e = abs_f = rgh = 0.0
    cells = edge_n = flat_n = 0
    for pred, s in zip(preds, samples):
        gt = s.gt_heights.astype(np.float64)
        err = pred.astype(np.float64) - gt
        sq += float((err * err).sum())
        cells += err.size
        if s.m_edge.any():
            abs_e += float(np.abs(err[s.m_edge]).sum())
            edge_n += int(s.m_edge.sum())
        if s.m_flat.any():
            abs_f += float(np.abs(err[s.m_flat]).sum())
            mp = sobel_magnitude(pred.astype(np.float64), 0.05)
            rgh += float(mp[s.m_flat].sum())
            flat_n += int(s.m_flat.sum())
    return {
        "count": len(samples),
        "g_mse": sq / cells,
        "e_mae": abs_e / edge_n if edge_n else None,
        "f_mae": abs_f / flat_n if flat_n else None,
        "f_rgh": rgh / flat_n if flat_n else None,
        "edge_cells": edge_n,
        "flat_cells": flat_n,
    }


def cmd_eval(args) -> int:
    out = _out_dir(args.out)
    samples, man = read_dataset(args.dataset)
    pman = read_json(str(args.pred) + ".json")
    if pman.get("format") != "stepsafe-predictions":
        raise DatasetFormatError("prediction manifest has the wrong format tag")
    shape = tuple(man["grid"]["shape"])
    if tuple(pman["shape"]) != shape or pman["count"] != len(samples):
        raise DatasetFormatError(
            f"prediction shape {pman['count']}x{tuple(pman['shape'])} does not "
            f"match dataset {len(samples)}x{shape}")
    blob = Path(str(args.pred) + ".bin").read_bytes()
    if len(blob) != pman["count"] * shape[0] * shape[1] * 4:
        raise DatasetFormatError("prediction blob size mismatch")
    if sha256_bytes(blob) != pman["sha256"]:
        raise DatasetFormatError("prediction blob does not match its checksum")
    preds = f32_from(blob, (pman["count"], *shape))

    records = []
    for k, (pred, s) in enumerate(zip(preds, samples)):
        rep = recon_metrics(pred.astype(np.float64),
                            s.gt_heights.astype(np.float64),
                            s.to_region_masks(),
                            resolution=man["grid"]["resolution"])
        records.append({"index": k, **rep.to_json()})
    write_jsonl(out / "metrics.jsonl", records)
    write_json(out / "summary.json", aggregate_metrics(preds, samples))
    _write_manifest(out, "eval", {"dataset": str(args.dataset),
                                  "pred": str(args.pred)})
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stepsafe", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("terrain", help="emit a terrain spec and PGM preview")
    _terrain_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_terrain)

    p = sub.add_parser("simulate", help="run the scan/fuse/extract pipeline")
    _terrain_args(p)
    _sensor_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--scenario", default="line", choices=["line", "dwell"])
    p.add_argument("--duration", type=float, default=1.0,
                   help="traverse (line) or dwell (dwell) duration [s]")
    p.add_argument("--speed", type=float, default=0.6)
    p.add_argument("--base-height", type=float, default=1.0)
    p.add_argument("--fuse-hz", type=float, default=DEFAULTS["rates"]["fuse_hz"])
    p.add_argument("--extract-hz", type=float,
                   default=DEFAULTS["rates"]["extract_hz"])
    p.add_argument("--t-decay", type=float, default=DEFAULTS["map"]["t_decay"])
    p.add_argument("--zone-radius", type=float,
                   default=DEFAULTS["zone"]["radius"])
    p.add_argument("--bench-points", type=int, default=0,
                   help="prepopulate the map with N lattice points")
    p.add_argument("--pose-jitter", type=float, default=0.0,
                   help="std of Gaussian noise on scan poses [m], default off")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("dataset", help="generate a reconstruction corpus")
    _sensor_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kinds", default="",
                   help="comma-separated terrain kinds, cycled per run")
    p.add_argument("--levels", default="",
                   help="comma-separated curriculum levels to draw from")
    p.add_argument("--samples-per-run", type=int, default=8)
    p.set_defaults(fn=cmd_dataset)

    p = sub.add_parser("penalty", help="sweep the unsafe-stepping penalty")
    _terrain_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--vx", type=float, default=0.7)
    p.add_argument("--vy", type=float, default=0.0)
    p.add_argument("--dz", type=float, default=0.02)
    p.add_argument("--heading", type=float, default=0.0)
    p.add_argument("--x0", type=float, default=-0.5)
    p.add_argument("--x1", type=float, default=1.5)
    p.add_argument("--y0", type=float, default=-0.5)
    p.add_argument("--y1", type=float, default=0.5)
    p.add_argument("--step", type=float, default=0.05)
    p.set_defaults(fn=cmd_penalty)

    p = sub.add_parser("eval", help="score a prediction blob against a dataset")
    p.add_argument("--pred", required=True,
                   help="prediction prefix (expects .json and .bin)")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_eval)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except DatasetFormatError as e:
        print(f"format error: {e}", file=sys.stderr)
        return EXIT_FORMAT
    except ValidationError as e:
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except StepsafeError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
