"""Builds the optional ahead-of-time kernel extension; metadata lives in pyproject.toml."""

import sys
from pathlib import Path

from setuptools import Distribution, setup
from setuptools.command.build_py import build_py

HERE = Path(__file__).parent.resolve()


class build_py_with_kernel(build_py):
    """Also compile the execution kernel ahead of time with numba.pycc.

    Failure is not fatal: the package falls back to JIT compilation.
    """

    def run(self):
        super().run()
        sys.path.insert(0, str(HERE / "src"))
        try:
            from rvum.aot import build
        except ImportError as exc:
            print(f"skipping ahead-of-time kernel: {exc}", file=sys.stderr)
            return
        target = HERE / "src" / "rvum" if self.editable_mode else Path(self.build_lib) / "rvum"
        try:
            build(target)
        except Exception as exc:
            print(f"skipping ahead-of-time kernel: {exc}", file=sys.stderr)


class BinaryDistribution(Distribution):
    # the wheel carries a compiled extension, so tag it for the platform
    def has_ext_modules(self):
        return True


setup(cmdclass={"build_py": build_py_with_kernel}, distclass=BinaryDistribution)
