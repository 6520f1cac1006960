import math

import numpy as np
import pytest

from stepsafe import _core_py
from stepsafe.backend import both_backends

FLAT = (0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0)
STAIRS = (2, 0.15, 0.3, 1.0, 0.0, 0.0, 0.0)


def _rays(n, seed=0):
    rng = np.random.default_rng(seed)
    o = np.column_stack([rng.uniform(-3, 3, n), rng.uniform(-3, 3, n),
                         rng.uniform(0.3, 2.5, n)])
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1)[:, None]
    return o, d


def test_raycast_45_degree_flat():
    o = np.array([[0.0, 0.0, 1.0]])
    d = np.array([[math.sqrt(0.5), 0.0, -math.sqrt(0.5)]])
    r = _core_py.raycast(*FLAT, o, d, 0.1, 15.0, 0.025, 20)
    assert abs(r[0] - math.sqrt(2.0)) < 1e-4


def test_upward_ray_misses():
    o = np.array([[0.0, 0.0, 1.0]])
    d = np.array([[0.0, 0.8, 0.6]])
    r = _core_py.raycast(*FLAT, o, d, 0.1, 15.0, 0.025, 20)
    assert np.isnan(r[0])


def test_ray_starting_below_surface_misses():
    o = np.array([[0.0, 0.0, -0.5]])
    d = np.array([[0.0, 0.0, -1.0]])
    r = _core_py.raycast(*FLAT, o, d, 0.1, 15.0, 0.025, 20)
    assert np.isnan(r[0])


def test_backends_bit_identical():
    backends = both_backends()
    if len(backends) < 2:
        pytest.skip("compiled backend not built")
    (_, comp), (_, pure) = backends
    o, d = _rays(800)
    for params in (FLAT, STAIRS, (1, math.tan(0.3), 1.0, 0.96, 0.28, 0.1, -0.2)):
        r1 = comp.raycast(*params, o, d, 0.1, 15.0, 0.025, 20)
        r2 = pure.raycast(*params, o, d, 0.1, 15.0, 0.025, 20)
        assert np.array_equal(np.isnan(r1), np.isnan(r2))
        assert np.array_equal(r1[~np.isnan(r1)], r2[~np.isnan(r2)])
        h1 = comp.terrain_heights(*params, o[:, 0], o[:, 1])
        h2 = pure.terrain_heights(*params, o[:, 0], o[:, 1])
        assert np.array_equal(h1, h2)
    rng = np.random.default_rng(1)
    cells = rng.integers(0, 560, 5000)
    z = rng.normal(size=5000)
    w = rng.uniform(0.0, 1.0, 5000)
    a = comp.accumulate_weighted(cells, z, w, 560)
    b = pure.accumulate_weighted(cells, z, w, 560)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_raycast_hits_riser_faces():
    # a shallow ray into a stair front must stop at the riser plane
    o = np.array([[0.0, 0.0, 0.05]])
    d = np.array([[1.0, 0.0, 0.0]])
    r = _core_py.raycast(*STAIRS, o, d, 0.01, 5.0, 0.025, 30)
    assert abs(r[0] - 0.3) < 1e-4
