"""Builds the compiled convolution/pooling kernels.

The package works without the extension (a NumPy fallback is selected at
import time); building it just makes training much faster:

    pip install -e . --no-build-isolation
"""

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "mpcnn.nn._kernels",
        ["src/mpcnn/nn/_kernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3", "-ffast-math"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(
    ext_modules=cythonize(
        extensions, compiler_directives={"language_level": "3", "boundscheck": False}
    )
)
