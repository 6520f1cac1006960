# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; hot-loop twin of ``_core_py``.

Arithmetic is kept in exactly the order used by the numpy fallback so both
backends produce bit-identical results (the build disables FP contraction).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, floor, isnan

cnp.import_array()

BACKEND = "compiled"

MODE_FLAT = 0
MODE_SLOPE = 1
MODE_STAIRS = 2


cdef inline double _height(int mode, double coef, double tread,
                           double cyaw, double syaw, double ox, double oy,
                           double x, double y) nogil:
    cdef double u = (x - ox) * cyaw + (y - oy) * syaw
    if mode == 0:
        return 0.0
    if mode == 1:
        return coef * u
    return coef * floor(u / tread)


def terrain_heights(int mode, double coef, double tread,
                    double cyaw, double syaw, double ox, double oy,
                    xs, ys):
    """Analytic terrain height at planar points; vectorized."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xa = np.ascontiguousarray(xs, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ya = np.ascontiguousarray(ys, dtype=np.float64).ravel()
    cdef Py_ssize_t n = xa.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            out[i] = _height(mode, coef, tread, cyaw, syaw, ox, oy, xa[i], ya[i])
    shape = np.shape(xs)
    return out.reshape(shape) if shape else out[0]


def raycast(int mode, double coef, double tread,
            double cyaw, double syaw, double ox, double oy,
            origins, dirs, double rmin, double rmax, double step, int refine):
    """First ray/terrain crossings by fixed-step march plus bisection."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] o = np.ascontiguousarray(origins, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] d = np.ascontiguousarray(dirs, dtype=np.float64)
    cdef Py_ssize_t n = o.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.full(n, np.nan)
    cdef int n_steps = <int> ceil((rmax - rmin) / step)
    cdef Py_ssize_t i
    cdef int k, j
    cdef double px, py, pz, t, tp, f, fp, lo, hi, mid, fm
    cdef double rx, ry, rz, dx, dy, dz
    with nogil:
        for i in range(n):
            rx = o[i, 0]; ry = o[i, 1]; rz = o[i, 2]
            dx = d[i, 0]; dy = d[i, 1]; dz = d[i, 2]
            px = rx + rmin * dx
            py = ry + rmin * dy
            pz = rz + rmin * dz
            fp = pz - _height(mode, coef, tread, cyaw, syaw, ox, oy, px, py)
            if fp < 0.0:
                continue
            tp = rmin
            for k in range(1, n_steps + 1):
                t = rmin + k * step
                if t > rmax:
                    t = rmax
                px = rx + t * dx
                py = ry + t * dy
                pz = rz + t * dz
                f = pz - _height(mode, coef, tread, cyaw, syaw, ox, oy, px, py)
                if f < 0.0:
                    lo = tp
                    hi = t
                    for j in range(refine):
                        mid = 0.5 * (lo + hi)
                        px = rx + mid * dx
                        py = ry + mid * dy
                        pz = rz + mid * dz
                        fm = pz - _height(mode, coef, tread, cyaw, syaw, ox, oy, px, py)
                        if fm < 0.0:
                            hi = mid
                        else:
                            lo = mid
                    out[i] = hi
                    break
                tp = t
    return out


def accumulate_weighted(cells, z, w, Py_ssize_t ncells):
    """Sequential weighted accumulation per cell, in input order."""
    cdef cnp.ndarray[cnp.int64_t, ndim=1] c = np.ascontiguousarray(cells, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] za = np.ascontiguousarray(z, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] wa = np.ascontiguousarray(w, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] wsum = np.zeros(ncells, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] wzsum = np.zeros(ncells, dtype=np.float64)
    cdef Py_ssize_t i, n = c.shape[0]
    with nogil:
        for i in range(n):
            wsum[c[i]] += wa[i]
            wzsum[c[i]] += wa[i] * za[i]
    return wsum, wzsum
