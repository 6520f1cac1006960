"""Pure-numpy kernels; fallback twin of the compiled extension.

Both backends implement identical arithmetic in identical order, so their
outputs are bit-for-bit equal. Any change here must be mirrored in
``_core.pyx``.
"""

import numpy as np

BACKEND = "python"

# terrain modes
MODE_FLAT = 0
MODE_SLOPE = 1
MODE_STAIRS = 2


def terrain_heights(mode, coef, tread, cyaw, syaw, ox, oy, xs, ys):
    """Analytic terrain height at planar points; vectorized."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    u = (xs - ox) * cyaw + (ys - oy) * syaw
    if mode == MODE_FLAT:
        return np.zeros_like(u)
    if mode == MODE_SLOPE:
        return coef * u
    return coef * np.floor(u / tread)


def raycast(mode, coef, tread, cyaw, syaw, ox, oy,
            origins, dirs, rmin, rmax, step, refine):
    """First ray/terrain crossings by fixed-step march plus bisection.

    Returns hit ranges, NaN where a ray never passes below the surface in
    [rmin, rmax]. Rays already below the surface at rmin are misses.
    """
    origins = np.asarray(origins, dtype=np.float64)
    dirs = np.asarray(dirs, dtype=np.float64)
    n = origins.shape[0]
    out = np.full(n, np.nan)

    def f_at(t, idx):
        px = origins[idx, 0] + t * dirs[idx, 0]
        py = origins[idx, 1] + t * dirs[idx, 1]
        pz = origins[idx, 2] + t * dirs[idx, 2]
        return pz - terrain_heights(mode, coef, tread, cyaw, syaw, ox, oy, px, py)

    active = np.arange(n)
    t_prev = np.full(n, rmin)
    f_prev = f_at(np.full(n, rmin), active)
    active = active[f_prev >= 0.0]

    lo = np.empty(n)
    hi = np.empty(n)
    hit = np.zeros(n, dtype=bool)

    n_steps = int(np.ceil((rmax - rmin) / step))
    for k in range(1, n_steps + 1):
        if active.size == 0:
            break
        t = rmin + k * step
        if t > rmax:
            t = rmax
        tv = np.full(active.size, t)
        fv = f_at(tv, active)
        crossed = fv < 0.0
        idx = active[crossed]
        lo[idx] = t_prev[idx]
        hi[idx] = t
        hit[idx] = True
        active = active[~crossed]
        t_prev[active] = t

    idx = np.nonzero(hit)[0]
    if idx.size:
        a = lo[idx]
        b = hi[idx]
        for _ in range(refine):
            mid = 0.5 * (a + b)
            fm = f_at(mid, idx)
            below = fm < 0.0
            b = np.where(below, mid, b)
            a = np.where(below, a, mid)
        out[idx] = b
    return out


def accumulate_weighted(cells, z, w, ncells):
    """Sequential weighted accumulation per cell, in input order.

    Returns (weight sum, weighted height sum) arrays of length ncells.
    """
    cells = np.asarray(cells)
    z = np.asarray(z, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    wsum = np.bincount(cells, weights=w, minlength=ncells)
    wzsum = np.bincount(cells, weights=w * z, minlength=ncells)
    return wsum, wzsum
