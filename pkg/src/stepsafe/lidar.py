"""Simulated wide-FOV LiDAR over analytic terrain.

Rays follow a deterministic spherical lattice (uniform azimuth x uniform
elevation) with a seeded per-scan azimuth phase, emulating non-repetitive
coverage. Returns are first ray/terrain crossings, perturbed along the ray by
Gaussian range noise. A separate ray-drop pass removes returns with a
probability that grows with the local terrain gradient, reproducing the loss
of signal on steep surfaces such as stair risers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .config import DEFAULTS
from .errors import DegenerateRaycastError, ValidationError
from .geometry import Pose, rotate_points
from .mapping import StampedCloud

_S = DEFAULTS["sensor"]
_D = DEFAULTS["ray_drop"]


@dataclass(frozen=True)
class RayDropParams:
    """Affine-in-gradient drop probability, clamped to [0, 1].

    p = clamp(base_drop_prob + slope_gain * max(0, |grad| - slope_threshold))
    where |grad| is a central finite difference of the terrain at probe_step,
    so riser discontinuities register as steep even though tread interiors
    are analytically flat.
    """

    base_drop_prob: float = _D["base_drop_prob"]
    slope_gain: float = _D["slope_gain"]
    slope_threshold: float = _D["slope_threshold"]
    probe_step: float = _D["probe_step"]

    def __post_init__(self):
        if not (0.0 <= self.base_drop_prob <= 1.0):
            raise ValidationError("base_drop_prob must lie in [0, 1]")
        if self.slope_gain < 0 or self.slope_threshold < 0:
            raise ValidationError("slope_gain and slope_threshold must be >= 0")

    def drop_probability(self, grad_mag: np.ndarray) -> np.ndarray:
        excess = np.maximum(0.0, grad_mag - self.slope_threshold)
        return np.clip(self.base_drop_prob + self.slope_gain * excess, 0.0, 1.0)


@dataclass(frozen=True)
class SensorModel:
    """Scan-pattern and noise parameters of the simulated sensor."""

    n_azimuth: int = _S["n_azimuth"]
    n_elevation: int = _S["n_elevation"]
    elevation_deg: tuple[float, float] = tuple(_S["elevation_deg"])
    min_range: float = _S["min_range"]
    max_range: float = _S["max_range"]
    range_noise_std: float = _S["range_noise_std"]
    march_step: float = _S["march_step"]
    refine_iters: int = _S["refine_iters"]
    drop: RayDropParams = field(default_factory=RayDropParams)

    def __post_init__(self):
        if self.n_azimuth <= 0 or self.n_elevation <= 0:
            raise ValidationError("ray counts must be positive")
        if not self.min_range < self.max_range:
            raise ValidationError("min_range must be below max_range")
        if self.elevation_deg[0] >= self.elevation_deg[1]:
            raise ValidationError("elevation limits must be increasing")

    @property
    def rays_per_scan(self) -> int:
        return self.n_azimuth * self.n_elevation

    @property
    def elevation_fov_deg(self) -> float:
        return self.elevation_deg[1] - self.elevation_deg[0]

    def ray_directions(self, phase: float = 0.0) -> np.ndarray:
        """Unit directions of one scan in the sensor frame."""
        az = phase + 2.0 * math.pi * np.arange(self.n_azimuth) / self.n_azimuth
        lo, hi = np.radians(self.elevation_deg)
        el = lo + (np.arange(self.n_elevation) + 0.5) * (hi - lo) / self.n_elevation
        azg, elg = np.meshgrid(az, el, indexing="ij")
        ce = np.cos(elg)
        dirs = np.stack([ce * np.cos(azg), ce * np.sin(azg), np.sin(elg)], axis=-1)
        return dirs.reshape(-1, 3)


def scan(field, sensor_pose: Pose, model: SensorModel, rng_seed: int,
         t: float = 0.0) -> StampedCloud:
    """One simulated scan; deterministic per seed.

    Points are expressed in the odometry frame at confidence 1. Rays whose
    first crossing lies outside [min_range, max_range], or whose hit leaves
    the terrain extent, produce no return.
    """
    px, py, pz = (float(v) for v in sensor_pose.position)
    ground = field.height_at(px, py)
    if pz <= ground:
        raise DegenerateRaycastError("sensor at or below the terrain surface")

    rng = np.random.default_rng(rng_seed)
    phase = float(rng.uniform(0.0, 2.0 * math.pi / model.n_azimuth))
    dirs = rotate_points(sensor_pose.rotation_matrix(), model.ray_directions(phase))
    origins = np.broadcast_to(sensor_pose.position, dirs.shape)

    ranges = backend.raycast(*field.kernel_params, np.ascontiguousarray(origins),
                             np.ascontiguousarray(dirs),
                             model.min_range, model.max_range,
                             model.march_step, model.refine_iters)
    hit = np.isfinite(ranges)
    if model.range_noise_std > 0.0:
        ranges = ranges.copy()
        ranges[hit] += rng.normal(0.0, model.range_noise_std, int(hit.sum()))

    pts = origins[hit] + dirs[hit] * ranges[hit, None]
    inside = field.contains_mask(pts[:, 0], pts[:, 1])
    return StampedCloud.from_xyz(pts[inside], confidence=1.0, t=t)


def apply_ray_drop(cloud: StampedCloud, field, params: RayDropParams,
                   rng_seed: int) -> StampedCloud:
    """Independently drop points with gradient-conditioned probability."""
    if cloud.n == 0:
        return cloud
    grad = field.finite_gradient_at(cloud.xyz[:, 0], cloud.xyz[:, 1],
                                    step=params.probe_step)
    mag = np.hypot(grad[..., 0], grad[..., 1])
    p = params.drop_probability(mag)
    rng = np.random.default_rng(rng_seed)
    keep = rng.random(cloud.n) >= p
    return StampedCloud(cloud.xyz[keep], cloud.confidence[keep], cloud.times[keep])
