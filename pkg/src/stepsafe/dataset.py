"""Reconstruction dataset pipeline and interchange format.

A sample pairs a sparse rasterized input grid (with its invalid-cell mask)
against the analytic ground-truth grid and its region masks. Simulation runs
on an event queue with integer-microsecond ticks, so the two-frequency
fuse/extract contract is exact and the whole pipeline is a pure function of
its seeds.

Dataset layout on disk: one ``manifest.json`` plus one ``tensors.bin`` of
fixed-size records (little-endian, row-major):

    input_heights  float32[nx*ny]   NaN at invalid cells
    input_valid    uint8[nx*ny]
    gt_heights     float32[nx*ny]
    m_gt           float32[nx*ny]
    m_edge         uint8[nx*ny]
    m_flat         uint8[nx*ny]

The manifest records shape, thresholds, loss weights, seeds, per-record byte
offsets, and the SHA-256 of the payload.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .config import DEFAULTS
from .errors import StepsafeError, ValidationError
from .geometry import Pose, world_to_frame
from .seeding import seed_seq
from .lidar import SensorModel, apply_ray_drop, scan
from .mapping import (GRID_RESOLUTION, GlobalMap, LocalGrid,
                      ProtectionZone, decay_and_prune, extract_local_grid, fuse)
from .recon import EDGE_THRESH, FLAT_THRESH, LossWeights, RegionMasks, region_masks
from .serial import (f32_bytes, f32_from, read_json, sha256_bytes, u8_bytes,
                     u8_from, write_json)
from .terrain import HeightField, sample_curriculum

DATASET_VERSION = 1


class DatasetFormatError(StepsafeError):
    """Malformed dataset directory or payload."""


class DatasetVersionError(DatasetFormatError):
    """Manifest declares an unsupported format version."""


class DatasetTruncatedError(DatasetFormatError):
    def __init__(self, record_index: int, msg: str):
        super().__init__(msg)
        self.record_index = record_index


class DatasetChecksumError(DatasetFormatError):
    """Payload bytes do not match the manifest checksum."""


@dataclass(frozen=True)
class ReconSample:
    """One training example."""

    input_heights: np.ndarray  # float32, NaN sentinel at invalid cells
    input_valid: np.ndarray    # bool
    gt_heights: np.ndarray     # float32, fully valid
    m_gt: np.ndarray           # float32 gradient magnitude of gt
    m_edge: np.ndarray         # bool
    m_flat: np.ndarray         # bool
    meta: dict

    def to_region_masks(self) -> RegionMasks:
        return RegionMasks(m_gt=self.m_gt.astype(np.float64),
                           m_edge=self.m_edge, m_flat=self.m_flat)


class TrajectorySpec:
    """Timed waypoints plus the pipeline rates.

    Poses are interpolated piecewise-linearly in position and yaw; waypoint
    orientations are treated as gravity-aligned (yaw only).
    """

    def __init__(self, waypoints, fuse_rate: float = DEFAULTS["rates"]["fuse_hz"],
                 extract_rate: float = DEFAULTS["rates"]["extract_hz"],
                 scan_rate: float | None = None):
        if len(waypoints) < 1:
            raise ValidationError("trajectory needs at least one waypoint")
        times = [t for _, t in waypoints]
        if any(t1 >= t2 for t1, t2 in zip(times, times[1:])):
            raise ValidationError("waypoint times must be strictly increasing")
        if fuse_rate <= 0 or extract_rate <= 0:
            raise ValidationError("rates must be positive")
        if extract_rate < 50.0:
            raise ValidationError("extraction must run at 50 Hz or faster")
        self.waypoints = list(waypoints)
        self.fuse_rate = float(fuse_rate)
        self.extract_rate = float(extract_rate)
        self.scan_rate = float(scan_rate) if scan_rate else self.fuse_rate

    @property
    def duration(self) -> float:
        return self.waypoints[-1][1]

    def pose_at(self, t: float) -> Pose:
        wps = self.waypoints
        if t <= wps[0][1]:
            return wps[0][0]
        if t >= wps[-1][1]:
            return wps[-1][0]
        for (pa, ta), (pb, tb) in zip(wps, wps[1:]):
            if ta <= t <= tb:
                f = (t - ta) / (tb - ta)
                pos = pa.position + f * (pb.position - pa.position)
                ya, yb = pa.yaw(), pb.yaw()
                dy = math.atan2(math.sin(yb - ya), math.cos(yb - ya))
                return Pose.from_yaw(pos[0], pos[1], pos[2], ya + f * dy)
        return wps[-1][0]


class SimEvent(NamedTuple):
    kind: str       # "fuse" or "extract"
    t: float
    map: GlobalMap
    grid: LocalGrid | None


def _ground_pose(field: HeightField, base: Pose) -> Pose:
    x, y = float(base.position[0]), float(base.position[1])
    return Pose.from_yaw(x, y, float(field.heights_unchecked(x, y)), base.yaw())


def simulate_run(field: HeightField, traj: TrajectorySpec, sensor: SensorModel,
                 seed: int, *, map_params: dict | None = None,
                 zone_radius: float = DEFAULTS["zone"]["radius"],
                 zone_z_extent: float = DEFAULTS["zone"]["z_extent"],
                 drop: bool = True,
                 pose_jitter_std: float = 0.0,
                 prepopulate: np.ndarray | None = None) -> Iterator[SimEvent]:
    """Drive scan/fuse/extract on a simulated clock; deterministic per seed.

    Events run on integer-microsecond ticks; at coincident times a scan
    precedes the fuse that consumes it, and extraction sees the fused map.
    Extraction poses sit at ground height under the base (foot frame).
    ``prepopulate`` seeds the map with extra points before the run;
    ``pose_jitter_std`` adds seeded Gaussian noise to each scan's sensor
    position (an odometry-drift hook, off by default).
    """
    if not field.contains(*(float(v) for v in traj.pose_at(0.0).position[:2])):
        raise ValidationError("trajectory starts outside the terrain extent")

    m = GlobalMap.empty(**(map_params or {}))
    if prepopulate is not None and len(prepopulate):
        from .mapping import StampedCloud
        m = fuse(m, StampedCloud.from_xyz(prepopulate), 0.0, traj.pose_at(0.0))

    duration_us = int(round(traj.duration * 1e6))
    scan_us = int(round(1e6 / traj.scan_rate))
    fuse_us = int(round(1e6 / traj.fuse_rate))
    extract_us = int(round(1e6 / traj.extract_rate))

    events = []
    for kind, period, prio in (("scan", scan_us, 0), ("fuse", fuse_us, 1),
                               ("extract", extract_us, 2)):
        k = 1
        while k * period <= duration_us:
            events.append((k * period, prio, kind))
            k += 1
    events.sort()

    pending = []
    scan_idx = 0
    for t_us, _, kind in events:
        t = t_us * 1e-6
        base = traj.pose_at(t)
        if not field.contains(float(base.position[0]), float(base.position[1])):
            raise ValidationError("trajectory leaves the terrain extent")
        if kind == "scan":
            scan_pose = base
            if pose_jitter_std > 0.0:
                jrng = np.random.default_rng(seed_seq(seed, scan_idx, 2))
                scan_pose = Pose(base.position
                                 + jrng.normal(0.0, pose_jitter_std, 3),
                                 base.quaternion)
            cloud = scan(field, scan_pose, sensor, seed_seq(seed, scan_idx), t=t)
            if drop:
                cloud = apply_ray_drop(cloud, field, sensor.drop,
                                       seed_seq(seed, scan_idx, 1))
            pending.append(cloud)
            scan_idx += 1
        elif kind == "fuse":
            for cloud in pending:
                m = fuse(m, cloud, t, base)
            pending.clear()
            zone = ProtectionZone.at_base(base, radius=zone_radius,
                                          z_extent=zone_z_extent)
            m = decay_and_prune(m, t, zone)
            yield SimEvent("fuse", t, m, None)
        else:
            grid = extract_local_grid(m, _ground_pose(field, base))
            yield SimEvent("extract", t, m, grid)


def make_sample(field: HeightField, foot_pose: Pose, grid: LocalGrid,
                edge_thresh: float = EDGE_THRESH, flat_thresh: float = FLAT_THRESH,
                meta: dict | None = None) -> ReconSample:
    """Pair a rasterized grid with its analytic ground truth and masks.

    Ground truth is the field height at each cell center, expressed in the
    foot frame; masks are derived from the stored float32 ground truth so
    they regenerate bit-identically from the serialized sample.
    """
    cx, cy = grid.cell_centers()
    flat = np.stack([cx.ravel(), cy.ravel(), np.zeros(cx.size)], axis=-1)
    rot = foot_pose.rotation_matrix()
    wx = foot_pose.position[0] + rot[0, 0] * flat[:, 0] + rot[0, 1] * flat[:, 1]
    wy = foot_pose.position[1] + rot[1, 0] * flat[:, 0] + rot[1, 1] * flat[:, 1]
    wz = field.heights_unchecked(wx, wy)
    local = world_to_frame(foot_pose, np.stack([wx, wy, wz], axis=-1))
    gt32 = local[:, 2].reshape(grid.shape).astype(np.float32)

    masks = region_masks(gt32.astype(np.float64), edge_thresh, flat_thresh,
                         resolution=grid.resolution)
    return ReconSample(
        input_heights=grid.heights.astype(np.float32),
        input_valid=grid.valid.copy(),
        gt_heights=gt32,
        m_gt=masks.m_gt.astype(np.float32),
        m_edge=masks.m_edge,
        m_flat=masks.m_flat,
        meta=dict(meta or {}),
    )


def _record_bytes(s: ReconSample) -> bytes:
    return (f32_bytes(s.input_heights) + u8_bytes(s.input_valid)
            + f32_bytes(s.gt_heights) + f32_bytes(s.m_gt)
            + u8_bytes(s.m_edge) + u8_bytes(s.m_flat))


def write_dataset(samples: list[ReconSample], path, *, seed: int,
                  edge_thresh: float = EDGE_THRESH, flat_thresh: float = FLAT_THRESH,
                  loss_weights: LossWeights | None = None,
                  extra: dict | None = None) -> None:
    if not samples:
        raise ValidationError("refusing to write an empty dataset")
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    shape = list(samples[0].gt_heights.shape)
    cells = shape[0] * shape[1]
    record_size = cells * (4 + 1 + 4 + 4 + 1 + 1)

    payload = bytearray()
    offsets = []
    metas = []
    for s in samples:
        if list(s.gt_heights.shape) != shape:
            raise ValidationError("all samples must share one grid shape")
        offsets.append(len(payload))
        payload.extend(_record_bytes(s))
        metas.append(s.meta)

    blob = bytes(payload)
    (path / "tensors.bin").write_bytes(blob)
    write_json(path / "manifest.json", {
        "format": "stepsafe-dataset",
        "version": DATASET_VERSION,
        "grid": {"shape": shape, "resolution": GRID_RESOLUTION},
        "thresholds": {"edge": edge_thresh, "flat": flat_thresh},
        "loss_weights": (loss_weights or LossWeights()).to_json(),
        "seed": seed,
        "sample_count": len(samples),
        "record_size": record_size,
        "offsets": offsets,
        "tensors_sha256": sha256_bytes(blob),
        "samples": metas,
        "extra": extra or {},
    })


def read_dataset(path) -> tuple[list[ReconSample], dict]:
    """Load a dataset; raises distinct errors for version, truncation, checksum."""
    path = Path(path)
    try:
        man = read_json(path / "manifest.json")
    except FileNotFoundError:
        raise DatasetFormatError(f"no manifest.json under {path}")
    except ValueError as e:
        raise DatasetFormatError(f"manifest.json is not valid JSON: {e}")
    if man.get("format") != "stepsafe-dataset":
        raise DatasetFormatError("manifest does not describe a dataset")
    if man.get("version") != DATASET_VERSION:
        raise DatasetVersionError(
            f"unsupported dataset version {man.get('version')!r}, "
            f"expected {DATASET_VERSION}")

    shape = tuple(man["grid"]["shape"])
    cells = shape[0] * shape[1]
    record_size = man["record_size"]
    count = man["sample_count"]
    blob = (path / "tensors.bin").read_bytes()
    if len(blob) != record_size * count:
        bad = min(len(blob) // record_size, count - 1)
        raise DatasetTruncatedError(
            bad, f"tensors.bin holds {len(blob)} bytes, expected "
                 f"{record_size * count}; record {bad} is incomplete")
    if sha256_bytes(blob) != man["tensors_sha256"]:
        raise DatasetChecksumError("tensors.bin does not match its checksum")

    samples = []
    f4, u1 = 4 * cells, cells
    for k in range(count):
        o = man["offsets"][k]
        ih = f32_from(blob[o:o + f4], shape); o += f4
        iv = u8_from(blob[o:o + u1], shape).astype(bool); o += u1
        gt = f32_from(blob[o:o + f4], shape); o += f4
        mg = f32_from(blob[o:o + f4], shape); o += f4
        me = u8_from(blob[o:o + u1], shape).astype(bool); o += u1
        mf = u8_from(blob[o:o + u1], shape).astype(bool)
        samples.append(ReconSample(ih, iv, gt, mg, me, mf,
                                   man["samples"][k]))
    return samples, man


# corpus generation -----------------------------------------------------------

_PATTERNS = ("straight", "diagonal", "lateral", "dwell")


def _run_trajectory(field: HeightField, pattern: str, rng, *,
                    base_height: float = 1.0, speed: float = 0.6,
                    duration: float = 3.0) -> TrajectorySpec:
    """Short pass (or dwell) across the terrain origin, seeded and bounded."""
    x0 = float(rng.uniform(-1.0, 0.0))
    y0 = float(rng.uniform(-0.5, 0.5))
    if pattern == "straight":
        head, move = 0.0, 0.0
    elif pattern == "diagonal":
        head = move = float(rng.uniform(0.3, 0.8))
    elif pattern == "lateral":
        head, move = math.pi / 2, 0.0
    else:
        head, move = 0.0, 0.0
    wps = []
    n_wp = 7
    for k in range(n_wp):
        t = k * duration / (n_wp - 1)
        if pattern == "dwell":
            x, y = x0, y0
        else:
            x = x0 + math.cos(move) * speed * t
            y = y0 + math.sin(move) * speed * t
        z = float(field.heights_unchecked(x, y)) + base_height
        wps.append((Pose.from_yaw(x, y, z, head), t))
    return TrajectorySpec(wps)


def generate_corpus(n_samples: int, seed: int, *, kinds=None, levels=None,
                    sensor: SensorModel | None = None, drop: bool = True,
                    samples_per_run: int = 8,
                    edge_thresh: float = EDGE_THRESH,
                    flat_thresh: float = FLAT_THRESH) -> list[ReconSample]:
    """Simulate runs over curriculum terrains until n_samples are collected."""
    from .terrain import make_terrain

    sensor = sensor or SensorModel()
    kinds = list(kinds) if kinds else ["stairs_up", "stairs_down", "slope_up",
                                       "slope_down", "flat"]
    levels = list(levels) if levels else list(range(4, 10))
    samples: list[ReconSample] = []
    run = 0
    while len(samples) < n_samples:
        rng = np.random.default_rng([seed, run])
        kind = kinds[run % len(kinds)]
        level = levels[int(rng.integers(len(levels)))]
        spec = sample_curriculum(level, seed_seq(seed, run, 1), kind=kind)
        field = make_terrain(spec)
        pattern = _PATTERNS[int(rng.integers(len(_PATTERNS)))]
        traj = _run_trajectory(field, pattern, rng)
        grids = [(ev.t, ev.grid) for ev in
                 simulate_run(field, traj, sensor, seed_seq(seed, run, 2), drop=drop)
                 if ev.kind == "extract"]
        stride = max(1, len(grids) // samples_per_run)
        picked = grids[::stride][-samples_per_run:]
        for t, grid in picked:
            if len(samples) >= n_samples:
                break
            samples.append(make_sample(
                field, grid.pose, grid, edge_thresh, flat_thresh,
                meta={"terrain": spec.to_json(), "run": run, "t": t,
                      "terrain_seed": seed_seq(seed, run, 1),
                      "pattern": pattern,
                      "pose": [float(v) for v in grid.pose.position] + [grid.pose.yaw()]}))
        run += 1
    return samples
