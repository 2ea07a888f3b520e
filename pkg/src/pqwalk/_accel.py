"""Numba switch.

Set ``PQWALK_NO_NUMBA=1`` in the environment (before import) to force the
pure-numpy kernels. Numba is also skipped silently when it is not installed.
"""

import os

_DISABLED = os.environ.get("PQWALK_NO_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("disabled by PQWALK_NO_NUMBA")
    import numba

    HAS_NUMBA = True
except ImportError:
    numba = None
    HAS_NUMBA = False


def njit(func):
    """``numba.njit(cache=True, nogil=True)`` when available, identity otherwise."""
    if HAS_NUMBA:
        return numba.njit(cache=True, nogil=True)(func)
    return func


BACKEND = "numba" if HAS_NUMBA else "numpy"
