"""Build script for the optional compiled epoch kernel.

The package works without the extension (a numpy fallback is selected at
import time); building it just makes training faster, especially for small
networks where per-batch Python overhead dominates.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "nsanet.kernels._fused",
                ["src/nsanet/kernels/_fused.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # No Cython/numpy at build time: install the pure-Python package.
    ext_modules = []

setup(ext_modules=ext_modules)
