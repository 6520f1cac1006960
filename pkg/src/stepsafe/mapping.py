"""Rolling point-cloud map with temporal confidence decay.

The map is a voxel-deduplicated point set in the odometry frame. Each point
carries a confidence that decays linearly with age and is locked at maximum
inside a cylindrical protection zone under the robot base, preserving terrain
memory in the sensor's physical blind zone. Robot-centric 2.5D local grids
are rasterized from the map at control rate.

All operations are functional: they return new maps and never mutate their
inputs, so a grid extraction always reads a consistent snapshot even while a
newer map is being fused elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import backend
from .config import DEFAULTS
from .errors import ValidationError
from .geometry import Pose, world_to_frame

GRID_SHAPE = tuple(DEFAULTS["grid"]["shape"])
GRID_RESOLUTION = float(DEFAULTS["grid"]["resolution"])


@dataclass(frozen=True)
class StampedCloud:
    """Points in the odometry frame with per-point confidence and insert time."""

    xyz: np.ndarray          # (N, 3) float64
    confidence: np.ndarray   # (N,) in [0, 1]
    times: np.ndarray        # (N,) seconds, >= 0

    def __post_init__(self):
        xyz = np.asarray(self.xyz, dtype=np.float64).reshape(-1, 3)
        conf = np.asarray(self.confidence, dtype=np.float64).reshape(-1)
        times = np.asarray(self.times, dtype=np.float64).reshape(-1)
        if not (xyz.shape[0] == conf.shape[0] == times.shape[0]):
            raise ValidationError("cloud arrays disagree on point count")
        if conf.size and (conf.min() < 0.0 or conf.max() > 1.0):
            raise ValidationError("confidences must lie in [0, 1]")
        if times.size and times.min() < 0.0:
            raise ValidationError("insert times must be non-negative")
        object.__setattr__(self, "xyz", xyz)
        object.__setattr__(self, "confidence", conf)
        object.__setattr__(self, "times", times)

    @property
    def n(self) -> int:
        return self.xyz.shape[0]

    @classmethod
    def empty(cls) -> "StampedCloud":
        return cls(np.empty((0, 3)), np.empty(0), np.empty(0))

    @classmethod
    def from_xyz(cls, xyz, confidence: float = 1.0, t: float = 0.0) -> "StampedCloud":
        xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
        n = xyz.shape[0]
        return cls(xyz, np.full(n, float(confidence)), np.full(n, float(t)))


@dataclass(frozen=True)
class ProtectionZone:
    """Cylinder under the base in which point confidences are locked to 1."""

    center_xy: tuple[float, float]
    base_z: float
    radius: float = DEFAULTS["zone"]["radius"]
    z_extent: float = DEFAULTS["zone"]["z_extent"]

    def __post_init__(self):
        if self.radius <= 0:
            raise ValidationError("protection zone radius must be positive")

    def contains(self, xyz: np.ndarray) -> np.ndarray:
        dx = xyz[:, 0] - self.center_xy[0]
        dy = xyz[:, 1] - self.center_xy[1]
        planar = dx * dx + dy * dy <= self.radius * self.radius
        zs = xyz[:, 2]
        return planar & (zs <= self.base_z) & (zs >= self.base_z - self.z_extent)

    @classmethod
    def at_base(cls, base_pose: Pose, radius=None, z_extent=None) -> "ProtectionZone":
        kw = {}
        if radius is not None:
            kw["radius"] = radius
        if z_extent is not None:
            kw["z_extent"] = z_extent
        return cls((float(base_pose.position[0]), float(base_pose.position[1])),
                   float(base_pose.position[2]), **kw)


@dataclass(frozen=True)
class GlobalMap:
    """Spatiotemporal rolling map state."""

    cloud: StampedCloud
    roll_radius: float = DEFAULTS["map"]["roll_radius"]
    t_decay: float = DEFAULTS["map"]["t_decay"]
    voxel_size: float = DEFAULTS["map"]["voxel_size"]
    refresh_age_in_zone: bool = DEFAULTS["map"]["refresh_age_in_zone"]

    @classmethod
    def empty(cls, **kw) -> "GlobalMap":
        return cls(StampedCloud.empty(), **kw)

    @property
    def n_points(self) -> int:
        return self.cloud.n


def _voxel_dedup(xyz, conf, times, voxel_size):
    """Keep the newest point per voxel; ties broken by insertion order."""
    n = xyz.shape[0]
    if n == 0:
        return xyz, conf, times
    kx = np.floor(xyz[:, 0] / voxel_size).astype(np.int64)
    ky = np.floor(xyz[:, 1] / voxel_size).astype(np.int64)
    kz = np.floor(xyz[:, 2] / voxel_size).astype(np.int64)
    seq = np.arange(n)
    order = np.lexsort((seq, times, kz, ky, kx))
    kx, ky, kz = kx[order], ky[order], kz[order]
    last = np.ones(n, dtype=bool)
    last[:-1] = (kx[1:] != kx[:-1]) | (ky[1:] != ky[:-1]) | (kz[1:] != kz[:-1])
    keep = order[last]
    return xyz[keep], conf[keep], times[keep]


def fuse(m: GlobalMap, cloud: StampedCloud, now: float, base_pose: Pose) -> GlobalMap:
    """Insert a scan at full confidence, deduplicate voxels, roll the window.

    Within a voxel the newest point wins; points farther than roll_radius
    (planar) from the base are evicted.
    """
    new_xyz = cloud.xyz
    xyz = np.concatenate([m.cloud.xyz, new_xyz])
    conf = np.concatenate([m.cloud.confidence, np.ones(new_xyz.shape[0])])
    times = np.concatenate([m.cloud.times, np.full(new_xyz.shape[0], float(now))])

    xyz, conf, times = _voxel_dedup(xyz, conf, times, m.voxel_size)

    dx = xyz[:, 0] - base_pose.position[0]
    dy = xyz[:, 1] - base_pose.position[1]
    keep = dx * dx + dy * dy <= m.roll_radius * m.roll_radius
    return replace(m, cloud=StampedCloud(xyz[keep], conf[keep], times[keep]))


def decay_and_prune(m: GlobalMap, now: float, zone: ProtectionZone | None) -> GlobalMap:
    """Update confidences: locked at 1 inside the zone, linear decay outside.

    Points reaching zero confidence are removed. With refresh_age_in_zone,
    a point's clock restarts whenever it sits inside the zone, so decay after
    the robot leaves counts from the moment of exit.
    """
    c = m.cloud
    if c.n == 0:
        return m
    if now < c.times.max():
        raise ValidationError("decay time precedes an insert time")
    age = now - c.times
    decayed = np.maximum(0.0, 1.0 - age / m.t_decay)
    if zone is not None:
        inside = zone.contains(c.xyz)
    else:
        inside = np.zeros(c.n, dtype=bool)
    conf = np.where(inside, 1.0, decayed)
    times = np.where(inside & m.refresh_age_in_zone, float(now), c.times)
    keep = inside | (decayed > 0.0)
    return replace(m, cloud=StampedCloud(c.xyz[keep], conf[keep], times[keep]))


@dataclass(frozen=True)
class LocalGrid:
    """Robot-centric 2.5D raster in the foot frame.

    Invalid (empty) cells hold NaN and are excluded from all statistics; the
    boolean mask is authoritative.
    """

    heights: np.ndarray
    valid: np.ndarray
    resolution: float
    pose: Pose
    min_confidence: float = 0.0

    @property
    def shape(self) -> tuple[int, int]:
        return self.heights.shape

    @property
    def extent(self) -> tuple[float, float]:
        return (self.heights.shape[0] * self.resolution,
                self.heights.shape[1] * self.resolution)

    def coverage(self) -> float:
        return float(self.valid.mean()) if self.valid.size else 0.0

    def cell_centers(self):
        """Foot-frame planar coordinates of every cell center."""
        nx, ny = self.heights.shape
        hx = 0.5 * nx * self.resolution
        hy = 0.5 * ny * self.resolution
        cx = -hx + (np.arange(nx) + 0.5) * self.resolution
        cy = -hy + (np.arange(ny) + 0.5) * self.resolution
        return np.meshgrid(cx, cy, indexing="ij")


def save_map(prefix, m: GlobalMap) -> None:
    """Checkpoint: JSON manifest + packed float32 (x, y, z, conf, t) records."""
    from pathlib import Path

    from .serial import f32_bytes, sha256_bytes, write_json

    rec = np.concatenate([m.cloud.xyz,
                          m.cloud.confidence[:, None],
                          m.cloud.times[:, None]], axis=1)
    payload = f32_bytes(rec)
    Path(str(prefix) + ".bin").write_bytes(payload)
    write_json(str(prefix) + ".json", {
        "format": "stepsafe-map",
        "version": 1,
        "count": m.cloud.n,
        "fields": ["x", "y", "z", "confidence", "insert_time"],
        "dtype": "<f4",
        "roll_radius": m.roll_radius,
        "t_decay": m.t_decay,
        "voxel_size": m.voxel_size,
        "refresh_age_in_zone": m.refresh_age_in_zone,
        "sha256": sha256_bytes(payload),
    })


def load_map(prefix) -> GlobalMap:
    from pathlib import Path

    from .serial import f32_from, read_json

    man = read_json(str(prefix) + ".json")
    rec = f32_from(Path(str(prefix) + ".bin").read_bytes(), (man["count"], 5))
    cloud = StampedCloud(rec[:, :3].astype(np.float64),
                         rec[:, 3].astype(np.float64),
                         rec[:, 4].astype(np.float64))
    return GlobalMap(cloud, roll_radius=man["roll_radius"],
                     t_decay=man["t_decay"], voxel_size=man["voxel_size"],
                     refresh_age_in_zone=man["refresh_age_in_zone"])


def extract_local_grid(m: GlobalMap, foot_pose: Pose,
                       min_confidence: float = DEFAULTS["map"]["min_confidence"],
                       shape: tuple[int, int] = GRID_SHAPE,
                       resolution: float = GRID_RESOLUTION) -> LocalGrid:
    """Crop and rasterize the map around a foot pose.

    Cell height is the confidence-weighted mean of member point heights,
    accumulated in a canonical sort order so the result is bit-identical
    under any permutation of the input points.
    """
    nx, ny = shape
    hx = 0.5 * nx * resolution
    hy = 0.5 * ny * resolution
    c = m.cloud
    if c.n == 0:
        heights = np.full(shape, np.nan)
        return LocalGrid(heights, np.zeros(shape, dtype=bool), resolution,
                         foot_pose, min_confidence)

    local = world_to_frame(foot_pose, c.xyz)
    ci = np.floor((local[:, 0] + hx) / resolution).astype(np.int64)
    cj = np.floor((local[:, 1] + hy) / resolution).astype(np.int64)
    ok = ((c.confidence >= min_confidence)
          & (ci >= 0) & (ci < nx) & (cj >= 0) & (cj < ny))

    cell = ci[ok] * ny + cj[ok]
    qx, qy, qz = local[ok, 0], local[ok, 1], local[ok, 2]
    w = c.confidence[ok]
    order = np.lexsort((w, qz, qy, qx, cell))
    wsum, wzsum = backend.accumulate_weighted(cell[order], qz[order], w[order], nx * ny)

    valid = wsum > 0.0
    heights = np.full(nx * ny, np.nan)
    heights[valid] = wzsum[valid] / wsum[valid]
    return LocalGrid(heights.reshape(shape), valid.reshape(shape), resolution,
                     foot_pose, min_confidence)
