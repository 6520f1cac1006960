"""Kernel backend selection.

Prefers the compiled extension when present; falls back to the pure-numpy
twin. Set STEPSAFE_FORCE_PY=1 to force the fallback (used by the benchmark
and the parity tests).
"""

import os

from . import _core_py

if os.environ.get("STEPSAFE_FORCE_PY"):
    _impl = _core_py
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _core_py

MODE_FLAT = _core_py.MODE_FLAT
MODE_SLOPE = _core_py.MODE_SLOPE
MODE_STAIRS = _core_py.MODE_STAIRS

terrain_heights = _impl.terrain_heights
raycast = _impl.raycast
accumulate_weighted = _impl.accumulate_weighted


def backend_name() -> str:
    return _impl.BACKEND


def both_backends():
    """(name, module) pairs for every importable backend."""
    out = [("python", _core_py)]
    try:
        from . import _core
        out.insert(0, ("compiled", _core))
    except ImportError:
        pass
    return out
