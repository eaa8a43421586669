import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the fast kernel if possible; the pure-Python fallback covers failure."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # missing compiler etc.
            print(f"warning: skipping compiled kernel ({exc}); using pure-Python backend")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: {ext.name} failed to build ({exc}); using pure-Python backend")


ext_modules = []
if os.environ.get("ROLESIM_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "rolesim._kernels._ck",
                    ["src/rolesim/_kernels/_ck.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        print("warning: Cython not available; using pure-Python backend")

setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
