import math

import numpy as np
import pytest

from stepsafe.errors import ExtentError, ValidationError
from stepsafe.terrain import (MAX_LEVEL, TerrainSpec, curriculum_upper_bounds,
                              make_terrain, sample_curriculum)


def test_flat_is_zero_everywhere(flat_field):
    rng = np.random.default_rng(0)
    xs = rng.uniform(-9, 9, 200)
    ys = rng.uniform(-9, 9, 200)
    assert np.all(flat_field.height_at(xs, ys) == 0.0)
    assert np.all(flat_field.gradient_at(xs, ys) == 0.0)


def test_stairs_step_across_riser(stair_field):
    # first riser past the origin sits at one tread depth
    assert stair_field.height_at(0.3 - 1e-9, 0.0) == 0.0
    assert stair_field.height_at(0.3 + 1e-9, 0.0) == pytest.approx(0.15)
    # piecewise-constant on treads, exact +rise per tread everywhere
    rng = np.random.default_rng(1)
    for _ in range(100):
        x = rng.uniform(-5, 5)
        if abs((x / 0.3) - round(x / 0.3)) < 1e-6:
            continue
        assert (stair_field.height_at(x + 0.3, 0.0)
                - stair_field.height_at(x, 0.0)) == pytest.approx(0.15, abs=1e-12)


def test_stairs_down_mirrors_up():
    down = make_terrain(TerrainSpec("stairs_down", tread_depth=0.3, step_height=0.15))
    assert down.height_at(0.3 + 1e-9, 0.0) == pytest.approx(-0.15)


def test_slope_plane_geometry():
    field = make_terrain(TerrainSpec("slope_up", slope_angle=0.4))
    assert field.height_at(1.0, 0.0) == pytest.approx(math.tan(0.4) * 1.0)
    g = field.gradient_at(0.3, -0.2)
    assert np.hypot(g[..., 0], g[..., 1]) == pytest.approx(math.tan(0.4))


def test_yawed_stairs_follow_axis():
    yaw = 0.7
    field = make_terrain(TerrainSpec("stairs_up", tread_depth=0.3,
                                     step_height=0.15, yaw=yaw))
    # a point one tread along the rotated axis has climbed one step
    x, y = 0.31 * math.cos(yaw), 0.31 * math.sin(yaw)
    assert field.height_at(x, y) == pytest.approx(0.15)
    # orthogonal moves stay on the same tread
    x2, y2 = x - 0.5 * math.sin(yaw), y + 0.5 * math.cos(yaw)
    assert field.height_at(x2, y2) == pytest.approx(0.15)


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(2)
    fields = [
        make_terrain(TerrainSpec("flat")),
        make_terrain(TerrainSpec("slope_up", slope_angle=0.3, yaw=0.4)),
        make_terrain(TerrainSpec("slope_down", slope_angle=0.25)),
        make_terrain(TerrainSpec("stairs_up", tread_depth=0.4, step_height=0.2)),
    ]
    h = 1e-4
    for field in fields:
        for _ in range(50):
            x, y = rng.uniform(-4, 4, 2)
            if field.spec.kind.startswith("stairs"):
                u = field.to_axis(x, y)
                # stay a cell away from the riser planes
                if abs(u - round(u / 0.4) * 0.4) < 0.05:
                    continue
            g = field.gradient_at(x, y)
            fx = (field.height_at(x + h, y) - field.height_at(x - h, y)) / (2 * h)
            fy = (field.height_at(x, y + h) - field.height_at(x, y - h)) / (2 * h)
            assert abs(g[..., 0] - fx) < 1e-6
            assert abs(g[..., 1] - fy) < 1e-6


def test_finite_gradient_sees_risers(stair_field):
    g = stair_field.finite_gradient_at(0.3, 0.0, step=0.05)
    assert np.hypot(g[..., 0], g[..., 1]) == pytest.approx(0.15 / 0.1)


def test_out_of_extent_query_raises(flat_field):
    with pytest.raises(ExtentError):
        flat_field.height_at(10.5, 0.0)
    with pytest.raises(ExtentError):
        flat_field.gradient_at(0.0, -10.5)


@pytest.mark.parametrize("kwargs", [
    {"kind": "stairs_up", "tread_depth": 0.2, "step_height": 0.1},
    {"kind": "stairs_up", "tread_depth": 0.3, "step_height": 0.5},
    {"kind": "slope_up", "slope_angle": 0.5},
    {"kind": "stairs_up", "tread_depth": 0.3, "step_height": 0.1, "level": 12},
    {"kind": "lava"},
])
def test_spec_validation(kwargs):
    with pytest.raises(ValidationError):
        TerrainSpec(**kwargs)


def test_curriculum_bounds_and_determinism():
    assert curriculum_upper_bounds(9)["step_height"] == pytest.approx(0.23)
    assert curriculum_upper_bounds(0)["step_height"] == 0.0

    a = sample_curriculum(4, 7)
    b = sample_curriculum(4, 7)
    assert a == b

    # level-0 stairs degenerate to flat treads
    s0 = sample_curriculum(0, 3, kind="stairs_up")
    assert s0.step_height == 0.0
    assert s0.tread_depth == pytest.approx(0.25)

    with pytest.raises(ValidationError):
        sample_curriculum(10, 0)


def test_curriculum_monotone_in_level():
    for lo, hi in zip(range(0, MAX_LEVEL), range(1, MAX_LEVEL + 1)):
        a, b = curriculum_upper_bounds(lo), curriculum_upper_bounds(hi)
        for key in a:
            assert a[key] <= b[key]
    # sampled values respect the level cap
    rng = np.random.default_rng(0)
    for level in range(10):
        cap = curriculum_upper_bounds(level)
        for seed in range(20):
            s = sample_curriculum(level, seed, kind="stairs_up")
            assert s.step_height <= cap["step_height"] + 1e-12
            assert s.tread_depth <= cap["tread_depth"] + 1e-12


def test_spec_json_round_trip():
    spec = TerrainSpec("stairs_down", tread_depth=0.35, step_height=0.12,
                       yaw=0.3, level=5)
    assert TerrainSpec.from_json(spec.to_json()) == spec


def test_riser_positions(stair_field):
    r = stair_field.riser_positions()
    assert 0.3 in np.round(r, 9)
    assert np.allclose(np.diff(r), 0.3)
