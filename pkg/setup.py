"""Build script with an optional compiled kernel extension.

The package works without the extension (a numpy fallback is selected at
import time); set STEPSAFE_NO_EXT=1 to skip compilation explicitly.
"""

import os

from setuptools import Extension, setup


def _extensions():
    if os.environ.get("STEPSAFE_NO_EXT"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    # fp-contract off: backend bit-parity requires no fused multiply-add
    ext = Extension(
        "stepsafe._core",
        ["src/stepsafe/_core.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O2", "-ffp-contract=off"],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


setup(ext_modules=_extensions())
