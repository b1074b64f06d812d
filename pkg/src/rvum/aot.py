"""Ahead-of-time build of the execution kernel.

The compiled extension lets ``rvum run`` start without importing numba.
Normally built by ``pip install``; rebuild by hand after editing
``_kernel.py``::

    python -m rvum.aot
"""

import argparse
import sys
from pathlib import Path

from ._accel import AOT_MODULE, kernel_source_hash


def make_cc(output_dir=None):
    """A configured :class:`numba.pycc.CC` for the kernel extension."""
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from numba.pycc import CC

    from . import _kernel

    cc = CC(AOT_MODULE)
    cc.output_dir = str(output_dir or Path(__file__).parent)
    cc.verbose = False
    cc.export("execute", _kernel.SIGNATURE)(_kernel.execute.py_func)

    stamp = kernel_source_hash()
    namespace = {}
    exec(f"def source_hash():\n    return {stamp}\n", namespace)
    cc.export("source_hash", "i8()")(namespace["source_hash"])
    return cc


def build(output_dir=None) -> Path:
    cc = make_cc(output_dir)
    cc.compile()
    return Path(cc.output_dir)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="python -m rvum.aot", description=__doc__.splitlines()[0])
    parser.add_argument("--output-dir", type=Path, help="where to place the extension (default: package dir)")
    args = parser.parse_args(argv)
    out = build(args.output_dir)
    print(f"built {AOT_MODULE} in {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
