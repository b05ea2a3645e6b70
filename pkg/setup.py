import os

import numpy as np
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None


class OptionalBuildExt(build_ext):
    """Build the compiled kernels if a toolchain is available.

    The package is fully functional with the pure-Python kernels, so a
    failed extension build downgrades to a warning instead of aborting
    the install.
    """

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing entirely
            print(f"WARNING: building compiled kernels failed ({exc}); "
                  "falling back to pure-Python kernels")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"WARNING: building {ext.name} failed ({exc}); "
                  "falling back to pure-Python kernels")


extensions = [
    Extension(
        "batchstate._kernels._core",
        ["src/batchstate/_kernels/_core.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

if cythonize is not None and not os.environ.get("BATCHSTATE_NO_EXT"):
    ext_modules = cythonize(extensions, compiler_directives={"language_level": "3"})
else:
    ext_modules = []

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
