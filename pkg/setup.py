"""Builds the optional compiled kernel extension.

The package works without it: comrp._kernels falls back to the numpy
implementations when the extension is absent.
"""

from setuptools import setup

try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/comrp/_kernels/_native.pyx",
        compiler_directives={"language_level": "3"},
    )
    include_dirs = [np.get_include()]
except ImportError:
    ext_modules = []
    include_dirs = []

setup(ext_modules=ext_modules, include_dirs=include_dirs)
