"""Build script; compiles the optional scoring kernels.

The compiled extension is a pure speedup: if Cython or a C compiler is
unavailable the install still succeeds and kgelab falls back to the numpy
kernels at import time. Set KGELAB_NO_EXT=1 to skip the extension build.

For an in-place development build:

    python setup.py build_ext --inplace
"""

import os

from setuptools import setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Swallow compiler failures so the pure-Python install survives."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001 - any toolchain failure
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print("*" * 72)
        print("WARNING: failed to build the compiled scoring kernels:")
        print(f"    {exc}")
        print("kgelab will use the numpy fallback kernels instead.")
        print("*" * 72)


def extensions():
    if os.environ.get("KGELAB_NO_EXT") == "1":
        return []
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    ext = Extension(
        "kgelab._kernels._core",
        sources=["src/kgelab/_kernels/_core.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
