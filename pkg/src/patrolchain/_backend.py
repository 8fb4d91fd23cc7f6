"""Kernel backend selection.

Hot loops are written once as plain Python loops and compiled with numba when
it is importable. Setting ``PATROLCHAIN_DISABLE_NUMBA=1`` forces the
vectorized numpy fallbacks instead.
"""
import os

ENV_FLAG = "PATROLCHAIN_DISABLE_NUMBA"

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _flag_set():
    return os.environ.get(ENV_FLAG, "").strip().lower() in ("1", "true", "yes", "on")


NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_AVAILABLE and not _flag_set()
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(func):
    """Compile ``func`` in nopython mode, or return it unchanged without numba."""
    if not NUMBA_AVAILABLE:
        return func
    return numba.njit(cache=True, nogil=True)(func)
