"""Dense unsafe-stepping penalty.

Two terms, both continuous in the foot state so they fire before a hazardous
contact happens:

* foot-collision: projects the foot velocity onto the vector to the nearest
  obstacle cell inside a cone around the velocity, scaled by how far inside
  the unsafe distance the obstacle sits; surfaces whose local slope stays
  below a threshold count as slopes, not obstacles.
* edge-stepping: detects steep cells under the foot sole with a Sobel pass,
  forms the vector from the foot center to their centroid, and penalizes the
  half of the foot that is hazardous for the current travel direction (front
  half on ascent, rear half on descent), faded out with sole clearance.

The total is a weighted sum per foot. Works against an analytic height field
or a rasterized local grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import DEFAULTS
from .errors import ValidationError
from .mapping import LocalGrid
from .recon import sobel_components

_P = DEFAULTS["penalty"]


@dataclass(frozen=True)
class FootState:
    """Planar foot kinematics used by the penalty terms."""

    center: tuple[float, float]
    v_xy: tuple[float, float] = (0.0, 0.0)
    d_z: float = 0.0
    sole_extent: tuple[float, float] = tuple(_P["sole_extent"])
    heading: float = 0.0

    def __post_init__(self):
        if self.d_z < 0:
            raise ValidationError("sole clearance d_z must be non-negative")
        if self.sole_extent[0] <= 0 or self.sole_extent[1] <= 0:
            raise ValidationError("sole extent must be positive")


@dataclass(frozen=True)
class PenaltyParams:
    d_unsafe: float = _P["d_unsafe"]
    eps_slope: float = _P["eps_slope"]
    d_min: float = _P["d_min"]
    w1: float = _P["w1"]
    w2: float = _P["w2"]
    cone_apex_angle: float = math.radians(_P["cone_apex_angle_deg"])
    edge_grad_threshold: float = _P["edge_grad_threshold"]
    riser_margin: float = _P["riser_margin"]
    resolution: float = DEFAULTS["grid"]["resolution"]
    foot_window: tuple[float, float] | None = None
    typeset_sign: bool = False  # outer-sign variant of the edge base term

    def __post_init__(self):
        for name in ("d_unsafe", "eps_slope", "d_min", "cone_apex_angle",
                     "edge_grad_threshold", "riser_margin", "resolution"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        if self.w1 < 0 or self.w2 < 0:
            raise ValidationError("weights must be non-negative")


@dataclass(frozen=True)
class PenaltyBreakdown:
    """Every intermediate of one foot evaluation, for inspection and tests."""

    d_xy: np.ndarray | None
    p_colli: float
    d_colli: float
    s: float
    r_colli: float
    e_c: np.ndarray | None
    e_xy: np.ndarray | None
    s_f: float
    g_mean: np.ndarray | None
    p_edge: float
    d_edge: float
    r_edge: float
    r_safe: float


def _height_lookup(terrain):
    """Vectorized height(x, y) in the terrain's working frame.

    HeightField: analytic evaluation (world frame). LocalGrid: nearest-cell
    lookup in the grid frame; missing/invalid cells yield NaN.
    """
    if isinstance(terrain, LocalGrid):
        nx, ny = terrain.shape
        res = terrain.resolution
        hx, hy = 0.5 * nx * res, 0.5 * ny * res
        heights = terrain.heights

        def fn(x, y):
            x = np.asarray(x, dtype=float)
            y = np.asarray(y, dtype=float)
            i = np.floor((x + hx) / res).astype(np.int64)
            j = np.floor((y + hy) / res).astype(np.int64)
            ok = (i >= 0) & (i < nx) & (j >= 0) & (j < ny)
            out = np.full(x.shape, np.nan)
            out[ok] = heights[i[ok], j[ok]]
            return out

        return fn
    return lambda x, y: np.asarray(terrain.heights_unchecked(x, y), dtype=float)


def _sample_window(height_fn, center, axis0, half_i, half_j, res):
    """Heights on a lattice of cell centers around ``center``.

    axis0 is the unit direction of rows; columns follow its left-normal.
    NaN samples (invalid grid cells) are filled with the window median of the
    finite samples, or 0 when the window is fully invalid.
    """
    a0x, a0y = axis0
    a1x, a1y = -a0y, a0x
    ii = np.arange(-half_i, half_i + 1, dtype=float) * res
    jj = np.arange(-half_j, half_j + 1, dtype=float) * res
    iu, jv = np.meshgrid(ii, jj, indexing="ij")
    xs = center[0] + iu * a0x + jv * a1x
    ys = center[1] + iu * a0y + jv * a1y
    h = height_fn(xs, ys)
    bad = ~np.isfinite(h)
    if bad.any():
        fill = float(np.median(h[~bad])) if (~bad).any() else 0.0
        h = np.where(bad, fill, h)
    return xs, ys, h, bad


def nearest_obstacle_in_cone(terrain, foot: FootState, params: PenaltyParams):
    """Nearest cell ahead of the foot that protrudes above the sole.

    Candidates are cells within d_unsafe of the foot center whose height
    exceeds the sole height by the riser margin and whose bearing lies within
    half the apex angle of the velocity direction. Returns (d_xy, s) with s
    the Sobel gradient magnitude at the chosen cell, or None.
    """
    vx, vy = foot.v_xy
    vnorm = math.hypot(vx, vy)
    if vnorm == 0.0:
        return None
    res = params.resolution
    height_fn = _height_lookup(terrain)
    fx, fy = foot.center
    ground = float(height_fn(np.array([fx]), np.array([fy]))[0])
    if not math.isfinite(ground):
        ground = 0.0
    sole_z = ground + foot.d_z

    n = int(math.ceil(params.d_unsafe / res))
    _, _, h, bad = _sample_window(height_fn, foot.center, (1.0, 0.0),
                                  n + 1, n + 1, res)
    gx, gy = sobel_components(h, res)
    smag = np.hypot(gx, gy)

    size = 2 * (n + 1) + 1
    idx = np.arange(size) - (n + 1)
    iu, jv = np.meshgrid(idx, idx, indexing="ij")
    dxs = iu * res
    dys = jv * res
    dist = np.hypot(dxs, dys)

    cos_half = math.cos(0.5 * params.cone_apex_angle)
    with np.errstate(invalid="ignore", divide="ignore"):
        bearing_ok = (dxs * vx + dys * vy) >= cos_half * vnorm * dist
    cand = ((h > sole_z + params.riser_margin)
            & (dist > 0.0) & (dist <= params.d_unsafe)
            & bearing_ok & ~bad)
    if not cand.any():
        return None
    ci, cj = np.nonzero(cand)
    d = dist[ci, cj]
    order = np.lexsort((cj, ci, d))
    k = order[0]
    i, j = int(ci[k]), int(cj[k])
    d_xy = np.array([dxs[i, j], dys[i, j]])
    return d_xy, float(smag[i, j])


def collision_terms(v_xy, d_xy, s: float, params: PenaltyParams):
    """Collision penalty arithmetic given an obstacle vector."""
    dn = math.hypot(d_xy[0], d_xy[1])
    p_colli = max(0.0, (v_xy[0] * d_xy[0] + v_xy[1] * d_xy[1]) / dn)
    d_colli = max(0.0, 1.0 - dn / params.d_unsafe)
    r_colli = -(1.0 if s > params.eps_slope else 0.0) * p_colli * d_colli
    return p_colli, d_colli, r_colli


def collision_penalty(terrain, foot: FootState, params: PenaltyParams):
    """(p_colli, d_colli, s, r_colli, d_xy); zeros when no obstacle applies."""
    hit = nearest_obstacle_in_cone(terrain, foot, params)
    if hit is None:
        return 0.0, 0.0, 0.0, 0.0, None
    d_xy, s = hit
    p_colli, d_colli, r_colli = collision_terms(foot.v_xy, d_xy, s, params)
    return p_colli, d_colli, s, r_colli, d_xy


def edge_points_under_foot(terrain, foot: FootState, params: PenaltyParams):
    """Steep cells in the sole window: (edge centers, centroid, mean gradient).

    The window is the sole bounding box inflated by one cell, aligned with
    the foot heading. Returns None when no cell exceeds the gradient
    threshold.
    """
    res = params.resolution
    if params.foot_window is not None:
        wu, wv = params.foot_window
    else:
        wu = foot.sole_extent[0] + 2.0 * res
        wv = foot.sole_extent[1] + 2.0 * res
    half_i = max(1, int(math.ceil(0.5 * wu / res)))
    half_j = max(1, int(math.ceil(0.5 * wv / res)))

    a0 = (math.cos(foot.heading), math.sin(foot.heading))
    height_fn = _height_lookup(terrain)
    xs, ys, h, _ = _sample_window(height_fn, foot.center, a0, half_i, half_j, res)
    gu, gv = sobel_components(h, res)
    mag = np.hypot(gu, gv)
    edge = mag > params.edge_grad_threshold
    if not edge.any():
        return None

    points = np.stack([xs[edge], ys[edge]], axis=-1)
    e_c = np.array([float(points[:, 0].mean()), float(points[:, 1].mean())])
    mu, mv = float(gu.mean()), float(gv.mean())
    a1 = (-a0[1], a0[0])
    g_mean = np.array([mu * a0[0] + mv * a1[0], mu * a0[1] + mv * a1[1]])
    return points, e_c, g_mean


def edge_terms(e_xy, g_mean, v_cmd, d_z: float, params: PenaltyParams):
    """Edge penalty arithmetic given the centroid vector and mean gradient."""
    vn = math.hypot(v_cmd[0], v_cmd[1])
    if vn == 0.0:
        raise ValidationError("edge term undefined for a zero velocity command")
    gdotv = g_mean[0] * v_cmd[0] + g_mean[1] * v_cmd[1]
    s_f = -float(np.sign(gdotv))
    proj = (e_xy[0] * v_cmd[0] + e_xy[1] * v_cmd[1]) / vn
    if params.typeset_sign:
        p_edge = s_f * min(0.0, proj)
    else:
        p_edge = min(0.0, s_f * proj)
    d_edge = max(0.0, 1.0 - d_z / params.d_min)
    r_edge = p_edge * d_edge
    return p_edge, s_f, d_edge, r_edge


def edge_penalty(terrain, foot: FootState, v_cmd, params: PenaltyParams):
    """(p_edge, s_f, d_edge, r_edge); zeros when the window has no edges."""
    if math.hypot(v_cmd[0], v_cmd[1]) == 0.0:
        raise ValidationError("edge term undefined for a zero velocity command")
    info = edge_points_under_foot(terrain, foot, params)
    if info is None:
        return 0.0, 0.0, 0.0, 0.0
    _, e_c, g_mean = info
    e_xy = np.array([e_c[0] - foot.center[0], e_c[1] - foot.center[1]])
    return edge_terms(e_xy, g_mean, v_cmd, foot.d_z, params)


def unsafe_stepping(terrain, feet, v_cmd, params: PenaltyParams):
    """Full penalty for a set of feet: breakdowns and the weighted total.

    Degenerate inputs are well-defined zeros here: zero foot velocity
    disables the collision term, a zero command disables the edge term.
    """
    if not feet:
        raise ValidationError("at least one foot is required")
    vn_cmd = math.hypot(v_cmd[0], v_cmd[1])
    breakdowns = []
    total = 0.0
    for foot in feet:
        p_c, d_c, s, r_c, d_xy = collision_penalty(terrain, foot, params)
        e_c = e_xy = g_mean = None
        p_e = s_f = d_e = r_e = 0.0
        if vn_cmd > 0.0:
            info = edge_points_under_foot(terrain, foot, params)
            if info is not None:
                _, e_c, g_mean = info
                e_xy = np.array([e_c[0] - foot.center[0], e_c[1] - foot.center[1]])
                p_e, s_f, d_e, r_e = edge_terms(e_xy, g_mean, v_cmd, foot.d_z, params)
        r_safe = params.w1 * r_c + params.w2 * r_e
        breakdowns.append(PenaltyBreakdown(
            d_xy=d_xy, p_colli=p_c, d_colli=d_c, s=s, r_colli=r_c,
            e_c=e_c, e_xy=e_xy, s_f=s_f, g_mean=g_mean,
            p_edge=p_e, d_edge=d_e, r_edge=r_e, r_safe=r_safe))
        total += r_safe
    return breakdowns, total


@dataclass(frozen=True)
class FootTemplate:
    """Foot parameters for sweeps; position comes from the sample grid."""

    d_z: float = 0.02
    sole_extent: tuple[float, float] = tuple(_P["sole_extent"])
    heading: float = 0.0
    v_xy: tuple[float, float] | None = None  # None: move with the command


def penalty_field(terrain, v_cmd, template: FootTemplate,
                  params: PenaltyParams, xs, ys):
    """Sweep a single foot over a sample grid; returns per-term fields."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    v_xy = tuple(v_cmd) if template.v_xy is None else template.v_xy
    r_colli = np.zeros((xs.size, ys.size))
    r_edge = np.zeros((xs.size, ys.size))
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            foot = FootState(center=(float(x), float(y)), v_xy=v_xy,
                             d_z=template.d_z, sole_extent=template.sole_extent,
                             heading=template.heading)
            bd, _ = unsafe_stepping(terrain, [foot], v_cmd, params)
            r_colli[i, j] = bd[0].r_colli
            r_edge[i, j] = bd[0].r_edge
    r_safe = params.w1 * r_colli + params.w2 * r_edge
    return {"r_colli": r_colli, "r_edge": r_edge, "r_safe": r_safe}
