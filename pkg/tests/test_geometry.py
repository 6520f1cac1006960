import math

import numpy as np
import pytest

from stepsafe.errors import ValidationError
from stepsafe.geometry import Pose, frame_to_world, world_to_frame


def test_quaternion_norm_enforced():
    with pytest.raises(ValidationError):
        Pose(np.zeros(3), np.array([1.0, 0.0, 0.1, 0.0]))
    # within tolerance passes
    Pose(np.zeros(3), np.array([1.0, 0.0, 1e-10, 0.0]))


def test_yaw_round_trip():
    for yaw in (-2.5, -0.3, 0.0, 1.2, 3.0):
        assert Pose.from_yaw(1, 2, 3, yaw).yaw() == pytest.approx(yaw)


def test_frame_transforms_invert():
    rng = np.random.default_rng(0)
    pose = Pose.from_yaw(0.4, -1.1, 0.7, 2.2)
    pts = rng.normal(size=(50, 3))
    back = frame_to_world(pose, world_to_frame(pose, pts))
    assert np.allclose(back, pts, atol=1e-12)


def test_yaw_rotation_matches_trig():
    pose = Pose.from_yaw(0.0, 0.0, 0.0, math.pi / 2)
    local = world_to_frame(pose, np.array([[1.0, 0.0, 0.0]]))
    assert np.allclose(local, [[0.0, -1.0, 0.0]], atol=1e-12)
