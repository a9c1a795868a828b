"""Build script: compiles the optional Cython kernel core.

Set REFBM_SKIP_EXT=1 to force the pure-NumPy backend (the package falls
back to it automatically whenever the extension is absent).
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("REFBM_SKIP_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext = Extension(
            "refbm._kernels",
            ["src/refbm/_kernels.pyx"],
            include_dirs=[np.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            # no FP contraction: compiled kernels must match the NumPy
            # fallback bitwise
            extra_compile_args=["-O3", "-ffp-contract=off"],
        )
        ext_modules = cythonize([ext], language_level="3")
    except ImportError:
        pass

setup(ext_modules=ext_modules)
