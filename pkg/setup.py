"""Build script for the compiled kernel extension.

The package works without the extension (a numpy fallback is selected at
import time), so the build degrades to pure Python when Cython or a C
compiler is unavailable.
"""

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/stall_sentinel/_kernels/_core.pyx"],
        language_level=3,
    )
    include_dirs = [numpy.get_include()]
    # -ffp-contract=off: the numpy backend must produce bit-identical floats,
    # and contraction of a*b+c into FMA would change rounding.
    for ext in ext_modules:
        ext.include_dirs = include_dirs
        ext.extra_compile_args = ["-O3", "-ffp-contract=off"]
        ext.define_macros = [("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")]
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
