"""Build script: compiles the optional Cython scoring kernel.

The package works without the extension (a NumPy fallback is selected at
import time), so any build failure here degrades to a pure-Python install
instead of aborting. Set GROWSET_SKIP_EXT=1 to skip the extension outright.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("GROWSET_SKIP_EXT"):
    try:
        from Cython.Build import cythonize

        # the .pyx cimports scipy.linalg.cython_blas, so scipy must be
        # importable at build time as well as at runtime
        ext_modules = cythonize(
            [
                Extension(
                    "growset.kernels._simcy",
                    ["src/growset/kernels/_simcy.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except Exception as err:  # noqa: BLE001 - degrade to the NumPy fallback
        print(f"growset: skipping compiled kernel ({err!r})")
        ext_modules = []

setup(ext_modules=ext_modules)
