"""Build hook for the optional compiled kernels.

The extension is skipped when Cython is unavailable; fdsic then runs on the
numpy fallback in fdsic/_kernels_py.py.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("FDSIC_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "fdsic._ckernels",
                    ["src/fdsic/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
