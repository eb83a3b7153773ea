"""Build script for the optional compiled kernel backend.

The package works without the extension (a pure-Python twin is selected at
import time), so the build degrades gracefully: set DUCA_PURE_PYTHON=1 to
skip compilation entirely.
"""

import os

from setuptools import Extension, setup


def _extensions():
    if os.environ.get("DUCA_PURE_PYTHON") == "1":
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "duca._kernels._core",
        ["src/duca/_kernels/_core.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=_extensions())
