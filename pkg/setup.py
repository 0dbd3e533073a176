"""Build script for the optional compiled core.

The extension is marked optional: if Cython or a C compiler is missing the
package still installs and falls back to the numpy implementation in
``hyperembed._pycore``.
"""
import os
import sys

import numpy as np
from setuptools import Extension, setup

openmp = [] if sys.platform == "darwin" or os.environ.get("HYPEREMBED_NO_OPENMP") else ["-fopenmp"]

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "hyperembed._core",
                ["src/hyperembed/_core.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"] + openmp,
                extra_link_args=openmp,
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
            "embedsignature": True,
        },
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
