"""Build script: compiles the optional C kernel extension.

The package works without the extension (pure-python kernels are selected at
import time), so a failed cythonization degrades to a warning rather than a
broken install.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "sigdex._ckernels",
                ["src/sigdex/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-env dependent
    sys.stderr.write(f"sigdex: skipping C kernels ({exc}); pure-python fallback will be used\n")

setup(ext_modules=ext_modules)
