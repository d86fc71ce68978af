"""Build script: compiles the optional Cython kernel extension.

The extension accelerates the convolution and raycasting inner loops. If the
build fails (no compiler, no Cython) the package still installs and falls
back to the pure-numpy kernels at import time.
"""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the extension if possible, otherwise warn and continue."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(f"WARNING: building the navlab._kernels._core extension failed ({exc}); "
              "the pure-Python kernel fallback will be used.")


def extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError as exc:
        print(f"WARNING: {exc}; skipping Cython extension build.")
        return []
    openmp = [] if os.environ.get("NAVLAB_NO_OPENMP") else ["-fopenmp"]
    ext = Extension(
        "navlab._kernels._core",
        sources=["src/navlab/_kernels/_core.pyx"],
        include_dirs=[numpy.get_include()],
        # -ffp-contract=off keeps the raycaster bit-identical to the pure-Python
        # fallback (no FMA contraction); determinism is part of the contract.
        extra_compile_args=["-O3", "-march=native", "-ffp-contract=off"] + openmp,
        extra_link_args=list(openmp),
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={
        "language_level": "3",
        "boundscheck": False,
        "wraparound": False,
        "cdivision": True,
        "initializedcheck": False,
    })


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
