import os
import sys

from setuptools import Extension, setup

# The compiled kernels are optional: if Cython or a C toolchain is missing the
# package installs anyway and falls back to the numpy implementation at import.
ext_modules = []
if not os.environ.get("PROTOAUDIO_PURE"):
    try:
        import numpy
        from Cython.Build import cythonize

        compile_args = ["-O3", "-ffast-math", "-march=native"]
        link_args = []
        if sys.platform.startswith("linux"):
            compile_args.append("-fopenmp")
            link_args.append("-fopenmp")
        ext_modules = cythonize(
            [
                Extension(
                    "protoaudio.kernels._convpool",
                    ["src/protoaudio/kernels/_convpool.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=compile_args,
                    extra_link_args=link_args,
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
