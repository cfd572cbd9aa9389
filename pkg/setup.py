"""Builds the optional compiled kernels; the package falls back to pure Python without them."""

import os

from setuptools import Extension, setup


def _extensions():
    if os.environ.get("IBART_NO_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    inc = np.get_include()
    lib = os.path.normpath(os.path.join(inc, "..", "..", "random", "lib"))
    ext = Extension(
        "ibart._ext",
        ["src/ibart/_ext.pyx"],
        include_dirs=[inc],
        library_dirs=[lib],
        libraries=["npyrandom"],
        extra_compile_args=["-O2", "-ffp-contract=off", "-fno-fast-math"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=_extensions())
