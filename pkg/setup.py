"""Build script for the optional compiled sampling kernels.

The package works without the extension: ddecop._kernels falls back to the
pure-Python reference implementation when `ddecop._kernels._zcore` is missing.
Build failures (no compiler, no Cython) therefore degrade to a warning.
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # no compiler, etc.
            warnings.warn(f"compiled kernels skipped ({exc}); using pure-Python fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"compiled kernels skipped ({exc}); using pure-Python fallback")


extensions = []
try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "ddecop._kernels._zcore",
                ["src/ddecop/_kernels/_zcore.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    warnings.warn("Cython not available; installing with the pure-Python kernel fallback")

setup(ext_modules=extensions, cmdclass={"build_ext": optional_build_ext})
