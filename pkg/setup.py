"""Build script for the optional compiled search kernel.

The package works without the extension: chargenet._backend falls back to the
pure-Python kernel when the compiled module is missing or fails to build.
-ffp-contract=off keeps the compiled arithmetic bit-identical to the Python
fallback (no fused multiply-add), which the backend parity tests rely on.
"""

import os

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is None or not os.path.exists("src/chargenet/_kernel.pyx"):
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "chargenet._kernel",
                ["src/chargenet/_kernel.pyx"],
                extra_compile_args=["-O2", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
