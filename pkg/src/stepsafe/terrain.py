"""Procedural terrain: stairs, slopes, and flat ground.

Fields are analytic: height and planar gradient are defined in closed form at
every coordinate, so they serve as exact ground truth for the sensor
simulator, the penalty terms, and the reconstruction datasets. Stairs ascend
along a configurable yawed axis with risers at integer multiples of the tread
depth; heights are measured from a zero datum at the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import backend
from .config import DEFAULTS
from .errors import ExtentError, ValidationError
from .seeding import seed_seq

KINDS = ("stairs_up", "stairs_down", "slope_up", "slope_down", "flat")

TREAD_RANGE = tuple(DEFAULTS["terrain"]["tread_range"])
STEP_RANGE = tuple(DEFAULTS["terrain"]["step_range"])
SLOPE_RANGE = tuple(DEFAULTS["terrain"]["slope_range"])
NUM_LEVELS = int(DEFAULTS["terrain"]["levels"])
MAX_LEVEL = NUM_LEVELS - 1

_STAIR_KINDS = ("stairs_up", "stairs_down")
_SLOPE_KINDS = ("slope_up", "slope_down")


@dataclass(frozen=True)
class TerrainSpec:
    """Parameters of one terrain patch."""

    kind: str
    tread_depth: float | None = None
    step_height: float | None = None
    slope_angle: float | None = None
    level: int = MAX_LEVEL
    yaw: float = 0.0
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown terrain kind {self.kind!r}")
        if not (0 <= self.level <= MAX_LEVEL):
            raise ValidationError(f"level {self.level} outside 0..{MAX_LEVEL}")
        if self.kind in _STAIR_KINDS:
            if self.tread_depth is None or self.step_height is None:
                raise ValidationError("stair terrain needs tread_depth and step_height")
            _check_range("tread_depth", self.tread_depth, TREAD_RANGE)
            _check_range("step_height", self.step_height, STEP_RANGE)
        elif self.kind in _SLOPE_KINDS:
            if self.slope_angle is None:
                raise ValidationError("slope terrain needs slope_angle")
            _check_range("slope_angle", self.slope_angle, SLOPE_RANGE)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "tread_depth": self.tread_depth,
            "step_height": self.step_height,
            "slope_angle": self.slope_angle,
            "level": self.level,
            "yaw": self.yaw,
            "origin": list(self.origin),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TerrainSpec":
        return cls(
            kind=obj["kind"],
            tread_depth=obj.get("tread_depth"),
            step_height=obj.get("step_height"),
            slope_angle=obj.get("slope_angle"),
            level=obj.get("level", MAX_LEVEL),
            yaw=obj.get("yaw", 0.0),
            origin=tuple(obj.get("origin", (0.0, 0.0))),
        )


def _check_range(name, value, rng):
    lo, hi = rng
    if not (lo <= value <= hi):
        raise ValidationError(f"{name}={value} outside [{lo}, {hi}]")


class HeightField:
    """Queryable continuous terrain over a finite rectangular extent.

    Immutable after construction; safe for concurrent reads.
    """

    def __init__(self, spec: TerrainSpec, extent_x: float, extent_y: float):
        if extent_x <= 0 or extent_y <= 0:
            raise ValidationError("extent must be positive")
        self.spec = spec
        self.extent_x = float(extent_x)
        self.extent_y = float(extent_y)
        self._cyaw = math.cos(spec.yaw)
        self._syaw = math.sin(spec.yaw)
        self._ox, self._oy = float(spec.origin[0]), float(spec.origin[1])
        if spec.kind == "flat":
            self._mode, self._coef, self._tread = backend.MODE_FLAT, 0.0, 1.0
        elif spec.kind in _SLOPE_KINDS:
            sign = 1.0 if spec.kind == "slope_up" else -1.0
            self._mode = backend.MODE_SLOPE
            self._coef = sign * math.tan(spec.slope_angle)
            self._tread = 1.0
        else:
            sign = 1.0 if spec.kind == "stairs_up" else -1.0
            self._mode = backend.MODE_STAIRS
            self._coef = sign * spec.step_height
            self._tread = spec.tread_depth

    # kernel parameter tuple, shared by the raycaster
    @property
    def kernel_params(self):
        return (self._mode, self._coef, self._tread,
                self._cyaw, self._syaw, self._ox, self._oy)

    def contains(self, x, y) -> bool:
        return bool(np.all(self.contains_mask(x, y)))

    def contains_mask(self, x, y) -> np.ndarray:
        hx, hy = 0.5 * self.extent_x, 0.5 * self.extent_y
        return ((np.abs(np.asarray(x) - self._ox) <= hx)
                & (np.abs(np.asarray(y) - self._oy) <= hy))

    def _check_extent(self, x, y):
        if not self.contains(x, y):
            raise ExtentError("query outside terrain extent")

    def height_at(self, x, y):
        """Terrain height, scalar or elementwise over arrays."""
        self._check_extent(x, y)
        out = backend.terrain_heights(*self.kernel_params, x, y)
        return float(out) if np.isscalar(x) or np.ndim(x) == 0 else out

    def heights_unchecked(self, x, y):
        """height_at without the extent check (internal hot path)."""
        return backend.terrain_heights(*self.kernel_params, x, y)

    def gradient_at(self, x, y):
        """Analytic planar gradient (rise/run).

        Stair treads are constant, so stairs report (0, 0) everywhere; at a
        riser plane this is the lower-tread one-sided value. Riser steepness
        is a raster-scale notion, handled by the Sobel pipeline.
        """
        self._check_extent(x, y)
        x = np.asarray(x, dtype=float)
        shape = x.shape
        if self._mode == backend.MODE_SLOPE:
            gx = np.full(shape, self._coef * self._cyaw)
            gy = np.full(shape, self._coef * self._syaw)
        else:
            gx = np.zeros(shape)
            gy = np.zeros(shape)
        return np.stack([gx, gy], axis=-1)

    def finite_gradient_at(self, x, y, step: float = 0.05):
        """Central-difference gradient at probe scale ``step``.

        Unlike the analytic gradient this sees riser discontinuities, which is
        what the ray-drop model conditions on.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        h = self.heights_unchecked
        inv = 1.0 / (2.0 * step)
        gx = (h(x + step, y) - h(x - step, y)) * inv
        gy = (h(x, y + step) - h(x, y - step)) * inv
        return np.stack([np.asarray(gx), np.asarray(gy)], axis=-1)

    def riser_positions(self) -> np.ndarray:
        """Axis coordinates u of riser planes inside the extent (stairs only)."""
        if self._mode != backend.MODE_STAIRS:
            return np.array([])
        reach = 0.5 * math.hypot(self.extent_x, self.extent_y)
        kmax = int(math.floor(reach / self._tread))
        return np.arange(-kmax, kmax + 1) * self._tread

    def to_axis(self, x, y):
        """Project planar points onto the traversal axis coordinate u."""
        return ((np.asarray(x, dtype=float) - self._ox) * self._cyaw
                + (np.asarray(y, dtype=float) - self._oy) * self._syaw)


def make_terrain(spec: TerrainSpec, extent: tuple[float, float] | None = None) -> HeightField:
    """Build the height field described by ``spec``."""
    if extent is None:
        extent = tuple(DEFAULTS["terrain"]["extent"])
    return HeightField(spec, extent[0], extent[1])


def sample_curriculum(level: int, rng_seed: int, kind: str | None = None) -> TerrainSpec:
    """Draw a terrain spec for a difficulty level.

    Upper parameter bounds grow linearly with level (factor level/9); lower
    bounds stay fixed, so level 9 reaches the full configured ranges and
    level 0 degenerates to the easiest variant of each kind.
    """
    if not (0 <= level <= MAX_LEVEL):
        raise ValidationError(f"level {level} outside 0..{MAX_LEVEL}")
    rng = np.random.default_rng(seed_seq(rng_seed, level))
    if kind is None:
        kind = KINDS[int(rng.integers(len(KINDS)))]
    elif kind not in KINDS:
        raise ValidationError(f"unknown terrain kind {kind!r}")
    frac = level / MAX_LEVEL

    def scaled_hi(rng_pair):
        lo, hi = rng_pair
        return lo + (hi - lo) * frac

    tread = step = angle = None
    if kind in _STAIR_KINDS:
        tread = float(rng.uniform(TREAD_RANGE[0], scaled_hi(TREAD_RANGE)))
        step = float(rng.uniform(STEP_RANGE[0], scaled_hi(STEP_RANGE)))
    elif kind in _SLOPE_KINDS:
        angle = float(rng.uniform(SLOPE_RANGE[0], scaled_hi(SLOPE_RANGE)))
    return TerrainSpec(kind=kind, tread_depth=tread, step_height=step,
                       slope_angle=angle, level=level)


def curriculum_upper_bounds(level: int) -> dict:
    """Level-scaled upper bounds, for monotonicity checks and manifests."""
    frac = level / MAX_LEVEL
    return {
        "tread_depth": TREAD_RANGE[0] + (TREAD_RANGE[1] - TREAD_RANGE[0]) * frac,
        "step_height": STEP_RANGE[0] + (STEP_RANGE[1] - STEP_RANGE[0]) * frac,
        "slope_angle": SLOPE_RANGE[0] + (SLOPE_RANGE[1] - SLOPE_RANGE[0]) * frac,
    }


def with_yaw(spec: TerrainSpec, yaw: float) -> TerrainSpec:
    return replace(spec, yaw=yaw)
