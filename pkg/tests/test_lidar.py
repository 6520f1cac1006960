import math

import numpy as np
import pytest

from stepsafe.errors import DegenerateRaycastError, ValidationError
from stepsafe.geometry import Pose, world_to_frame
from stepsafe.lidar import RayDropParams, SensorModel, apply_ray_drop, scan
from stepsafe.mapping import StampedCloud
from stepsafe.terrain import TerrainSpec, make_terrain

QUIET = SensorModel(range_noise_std=0.0, drop=RayDropParams(base_drop_prob=0.0))


def test_flat_scan_heights_near_zero(flat_field):
    cloud = scan(flat_field, Pose.from_yaw(0, 0, 1.0), QUIET, 3)
    assert cloud.n > 0
    assert np.abs(cloud.xyz[:, 2]).max() < 1e-6


def test_scan_deterministic_per_seed(flat_field):
    a = scan(flat_field, Pose.from_yaw(0, 0, 1.0), QUIET, 11)
    b = scan(flat_field, Pose.from_yaw(0, 0, 1.0), QUIET, 11)
    assert np.array_equal(a.xyz, b.xyz)
    c = scan(flat_field, Pose.from_yaw(0, 0, 1.0), QUIET, 12)
    assert not np.array_equal(a.xyz, c.xyz)


def test_returns_respect_elevation_fov(flat_field):
    pose = Pose.from_yaw(0.3, -0.2, 1.2, 0.8)
    cloud = scan(flat_field, pose, QUIET, 5)
    local = world_to_frame(pose, cloud.xyz)
    rng_len = np.linalg.norm(local, axis=1)
    elev = np.degrees(np.arcsin(local[:, 2] / rng_len))
    lo, hi = QUIET.elevation_deg
    assert elev.min() >= lo - 1e-6
    assert elev.max() <= hi + 1e-6


def test_noise_bounds_vertical_error(flat_field):
    model = SensorModel(range_noise_std=0.01, drop=RayDropParams(base_drop_prob=0.0))
    cloud = scan(flat_field, Pose.from_yaw(0, 0, 1.0), model, 7)
    err = np.abs(cloud.xyz[:, 2] - 0.0)
    assert err.max() <= 4.0 * 0.01


def test_stair_scan_matches_analytic_heights(stair_field):
    pose = Pose.from_yaw(0.0, 0.0, 1.5)
    cloud = scan(stair_field, pose, QUIET, 9)
    u = stair_field.to_axis(cloud.xyz[:, 0], cloud.xyz[:, 1])
    off_riser = np.abs(u - np.round(u / 0.3) * 0.3) > 1e-3
    gt = stair_field.heights_unchecked(cloud.xyz[off_riser, 0],
                                       cloud.xyz[off_riser, 1])
    assert np.abs(cloud.xyz[off_riser, 2] - gt).max() < 1e-3

    # one-tread window straddling a riser spans exactly one step height
    win = (u > 0.3 - 0.15) & (u < 0.3 + 0.15)
    zs = cloud.xyz[win, 2]
    assert zs.size > 10
    assert (zs.max() - zs.min()) == pytest.approx(0.15, abs=2e-3)


def test_sensor_below_terrain_raises(stair_field):
    with pytest.raises(DegenerateRaycastError):
        scan(stair_field, Pose.from_yaw(1.0, 0.0, 0.0), QUIET, 0)


def test_sensor_validation():
    with pytest.raises(ValidationError):
        SensorModel(n_azimuth=0)
    with pytest.raises(ValidationError):
        SensorModel(min_range=5.0, max_range=1.0)
    with pytest.raises(ValidationError):
        RayDropParams(base_drop_prob=1.5)


def test_drop_zero_on_flat_with_zero_base(flat_field):
    cloud = scan(flat_field, Pose.from_yaw(0, 0, 1.0), QUIET, 1)
    out = apply_ray_drop(cloud, flat_field,
                         RayDropParams(base_drop_prob=0.0), 4)
    assert out.n == cloud.n


def test_drop_rate_matches_base_probability(flat_field):
    rng = np.random.default_rng(0)
    n = 100_000
    xyz = np.column_stack([rng.uniform(-8, 8, n), rng.uniform(-8, 8, n),
                           np.zeros(n)])
    cloud = StampedCloud.from_xyz(xyz)
    out = apply_ray_drop(cloud, flat_field,
                         RayDropParams(base_drop_prob=0.3), 42)
    rate = 1.0 - out.n / n
    assert abs(rate - 0.3) < 0.01


def test_drop_saturates_on_risers(stair_field):
    # points on a riser plane see a steep finite-difference gradient
    xyz = np.column_stack([np.full(500, 0.3), np.linspace(-2, 2, 500),
                           np.full(500, 0.075)])
    cloud = StampedCloud.from_xyz(xyz)
    params = RayDropParams(base_drop_prob=0.0, slope_gain=2.0,
                           slope_threshold=0.6)
    out = apply_ray_drop(cloud, stair_field, params, 3)
    assert out.n == 0  # p = 0 + 2*(1.5 - 0.6) > 1 saturates
    # tread interiors see zero gradient and are never dropped
    xyz2 = np.column_stack([np.full(500, 0.15), np.linspace(-2, 2, 500),
                            np.zeros(500)])
    out2 = apply_ray_drop(StampedCloud.from_xyz(xyz2), stair_field, params, 3)
    assert out2.n == 500


def test_drop_deterministic(flat_field):
    rng = np.random.default_rng(1)
    xyz = np.column_stack([rng.uniform(-5, 5, 1000), rng.uniform(-5, 5, 1000),
                           np.zeros(1000)])
    cloud = StampedCloud.from_xyz(xyz)
    p = RayDropParams(base_drop_prob=0.5)
    a = apply_ray_drop(cloud, flat_field, p, 9)
    b = apply_ray_drop(cloud, flat_field, p, 9)
    assert np.array_equal(a.xyz, b.xyz)
