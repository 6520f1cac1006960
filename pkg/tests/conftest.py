import math

import numpy as np
import pytest

from stepsafe.penalty import FootState, PenaltyParams
from stepsafe.terrain import TerrainSpec, make_terrain


@pytest.fixture
def flat_field():
    return make_terrain(TerrainSpec("flat"))


@pytest.fixture
def stair_field():
    return make_terrain(TerrainSpec("stairs_up", tread_depth=0.3, step_height=0.15))


def random_stair_scene(rng):
    """One randomized stair terrain plus a foot state near the risers."""
    kind = "stairs_up" if rng.random() < 0.5 else "stairs_down"
    spec = TerrainSpec(
        kind,
        tread_depth=float(rng.uniform(0.25, 0.6)),
        step_height=float(rng.uniform(0.05, 0.23)),
        yaw=float(rng.uniform(0.0, 2.0 * math.pi)),
    )
    field = make_terrain(spec)
    speed = float(rng.uniform(0.0, 1.2))
    ang = float(rng.uniform(0.0, 2.0 * math.pi))
    foot = FootState(
        center=(float(rng.uniform(-1.5, 1.5)), float(rng.uniform(-1.5, 1.5))),
        v_xy=(speed * math.cos(ang), speed * math.sin(ang)),
        d_z=float(rng.uniform(0.0, 0.15)),
        heading=float(rng.uniform(0.0, 2.0 * math.pi)),
    )
    cang = float(rng.uniform(0.0, 2.0 * math.pi))
    cmag = float(rng.uniform(0.1, 1.0))
    v_cmd = (cmag * math.cos(cang), cmag * math.sin(cang))
    return field, foot, v_cmd, PenaltyParams()


def random_grid(rng, shape=(28, 20), scale=0.3):
    return rng.normal(0.0, scale, size=shape)
