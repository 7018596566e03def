"""Backend selection for the hot loops.

``SNTK_BACKEND=numba`` (default when numba imports) compiles the kernels in
:mod:`sntk.kernels` with ``@njit``; ``SNTK_BACKEND=numpy`` keeps the pure
numpy reference path. The flag is read once at import time.
"""

import os

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

_requested = os.environ.get("SNTK_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"SNTK_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

BACKEND = "numba" if (_requested == "numba" and HAS_NUMBA) else "numpy"


def njit(fn):
    """Compile ``fn`` with numba when available, else return it untouched."""
    if not HAS_NUMBA:
        return fn
    return numba.njit(cache=True)(fn)


def resolve(backend):
    if backend is None:
        return BACKEND
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend
