"""Builds the optional compiled conv kernels.

The package works without the extension: featsr.nn.kernels falls back to a
pure-numpy implementation when the compiled module is missing.
"""

from setuptools import setup
from setuptools.extension import Extension

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "featsr.nn.kernels._convops",
                ["src/featsr/nn/kernels/_convops.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
