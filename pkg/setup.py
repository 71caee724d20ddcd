"""Build the optional compiled core.

The extension is a pure accelerator: if Cython or a C toolchain is missing
the install completes anyway and the package runs on the pure-Python
backend.
"""

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # toolchain missing: ship without the core
            print(f"warning: skipping compiled core ({exc})")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: skipping {ext.name} ({exc})")


def extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError as exc:
        print(f"warning: building without the compiled core ({exc})")
        return []
    return cythonize(
        [
            Extension(
                "capdc._core",
                ["src/capdc/_core.pyx"],
                extra_compile_args=["-O3"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
