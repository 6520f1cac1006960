"""Rigid poses and frame transforms.

All transforms are written componentwise (no BLAS matmul) so results are
bit-reproducible and match scalar reference implementations exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

_QUAT_NORM_TOL = 1e-9


@dataclass(frozen=True)
class Pose:
    """Position plus unit quaternion (w, x, y, z) in the odometry frame."""

    position: np.ndarray
    quaternion: np.ndarray = field(
        default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0])
    )

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "quaternion", np.asarray(self.quaternion, dtype=float))
        if self.position.shape != (3,):
            raise ValidationError("pose position must be a 3-vector")
        if self.quaternion.shape != (4,):
            raise ValidationError("pose quaternion must be a 4-vector (w, x, y, z)")
        norm = math.sqrt(float(np.dot(self.quaternion, self.quaternion)))
        if abs(norm - 1.0) > _QUAT_NORM_TOL:
            raise ValidationError(f"quaternion norm {norm!r} deviates from 1 by more than {_QUAT_NORM_TOL}")

    @classmethod
    def from_yaw(cls, x: float, y: float, z: float, yaw: float = 0.0) -> "Pose":
        h = 0.5 * yaw
        return cls(np.array([x, y, z]), np.array([math.cos(h), 0.0, 0.0, math.sin(h)]))

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.zeros(3))

    def rotation_matrix(self) -> np.ndarray:
        w, x, y, z = self.quaternion
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )

    def yaw(self) -> float:
        w, x, y, z = self.quaternion
        return math.atan2(2 * (w * z + x * y), 1 - 2 * (y * y + z * z))


def rotate_points(rot: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Apply a 3x3 rotation to (N, 3) points, componentwise."""
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    out = np.empty_like(pts)
    out[:, 0] = rot[0, 0] * x + rot[0, 1] * y + rot[0, 2] * z
    out[:, 1] = rot[1, 0] * x + rot[1, 1] * y + rot[1, 2] * z
    out[:, 2] = rot[2, 0] * x + rot[2, 1] * y + rot[2, 2] * z
    return out


def world_to_frame(pose: Pose, pts: np.ndarray) -> np.ndarray:
    """Express world-frame points in the frame of ``pose`` (inverse transform)."""
    rot = pose.rotation_matrix()
    rel = pts - pose.position
    x, y, z = rel[:, 0], rel[:, 1], rel[:, 2]
    out = np.empty_like(rel)
    out[:, 0] = rot[0, 0] * x + rot[1, 0] * y + rot[2, 0] * z
    out[:, 1] = rot[0, 1] * x + rot[1, 1] * y + rot[2, 1] * z
    out[:, 2] = rot[0, 2] * x + rot[1, 2] * y + rot[2, 2] * z
    return out


def frame_to_world(pose: Pose, pts: np.ndarray) -> np.ndarray:
    """Express frame-local points of ``pose`` in the world frame."""
    return rotate_points(pose.rotation_matrix(), pts) + pose.position
