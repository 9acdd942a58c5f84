"""Build script: compiles the optional raster kernel extension.

Set CODEVISION_PURE=1 to skip the extension and install the pure-Python
package only; the kernel backend falls back automatically at import time.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("CODEVISION_PURE") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "codevision.raster._fastkernels",
                    ["src/codevision/raster/_fastkernels.pyx"],
                    extra_compile_args=["-O2"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
