"""Backend selection for the hot loops.

``RVUM_BACKEND`` picks how the execution kernel runs:

``auto`` (default)
    the ahead-of-time compiled extension when it is built and current,
    otherwise numba JIT (cached on disk), otherwise plain Python.
``aot`` / ``jit`` / ``python``
    force one path; ``aot`` fails loudly if the extension is missing.

``RVUM_DISABLE_NUMBA=1`` is shorthand for ``RVUM_BACKEND=python``. In the
Python path the same kernel source runs uncompiled over numpy arrays.
"""

import hashlib
import importlib
import importlib.util
import os
from pathlib import Path

BACKEND_ENV = "RVUM_BACKEND"
DISABLE_ENV = "RVUM_DISABLE_NUMBA"
BACKENDS = ("auto", "aot", "jit", "python")
AOT_MODULE = "_kernel_aot"
KERNEL_SOURCE = Path(__file__).with_name("_kernel.py")


def requested_backend() -> str:
    if os.environ.get(DISABLE_ENV, "").strip() not in ("", "0"):
        return "python"
    value = os.environ.get(BACKEND_ENV, "auto").strip().lower() or "auto"
    if value not in BACKENDS:
        raise RuntimeError(f"{BACKEND_ENV}={value!r}; expected one of {', '.join(BACKENDS)}")
    return value


_REQUESTED = requested_backend()

NUMBA_ENABLED = _REQUESTED != "python" and importlib.util.find_spec("numba") is not None


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when numba is in use, else the identity."""
    if NUMBA_ENABLED:
        import numba

        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


def kernel_source_hash() -> int:
    """63-bit digest of the kernel source, stamped into the AOT build."""
    digest = hashlib.sha256(KERNEL_SOURCE.read_bytes()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def _load_aot():
    try:
        mod = importlib.import_module(f"{__package__}.{AOT_MODULE}")
    except ImportError:
        return None
    if mod.source_hash() != kernel_source_hash():
        return None
    return mod.execute


_kernel_cache = None


def load_kernel():
    """Return ``(execute, backend_name)`` for the configured backend."""
    global _kernel_cache
    if _kernel_cache is not None:
        return _kernel_cache
    if _REQUESTED in ("auto", "aot"):
        fn = _load_aot()
        if fn is not None:
            _kernel_cache = (fn, "aot")
            return _kernel_cache
        if _REQUESTED == "aot":
            raise RuntimeError(
                "ahead-of-time kernel is missing or stale; rebuild with `python -m rvum.aot`"
            )
    if _REQUESTED == "jit" and not NUMBA_ENABLED:
        raise RuntimeError("RVUM_BACKEND=jit but numba is not installed")
    from . import _kernel

    _kernel_cache = (_kernel.execute, "jit" if NUMBA_ENABLED else "python")
    return _kernel_cache


def backend() -> str:
    """Name of the backend the execution kernel uses in this process."""
    return load_kernel()[1]
