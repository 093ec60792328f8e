"""Kernel backend selection.

Hot loops ship in two flavours: a numba ``@njit`` version and a vectorised
numpy version. ``REVERBAUG_BACKEND=numpy`` forces the numpy path; the default
is numba whenever it imports.
"""
import os

_requested = os.environ.get("REVERBAUG_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"REVERBAUG_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    numba = None
    HAS_NUMBA = False

BACKEND = "numba" if (_requested == "numba" and HAS_NUMBA) else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` with caching on, or a no-op when numba is missing."""
    kwargs.setdefault("cache", True)
    if HAS_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]):
        return args[0]
    return lambda f: f


def pick(numba_impl, numpy_impl):
    return numba_impl if BACKEND == "numba" else numpy_impl
