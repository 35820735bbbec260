"""Numba detection and the switch between compiled and pure-numpy kernels.

Set ``EKAHLER_DISABLE_NUMBA=1`` before import to force the numpy path.
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("EKAHLER_DISABLE_NUMBA", "0").strip().lower()

try:
    from numba import njit as _numba_njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba_njit = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def njit(fn):
    """Compile ``fn`` with numba when available, otherwise return it unchanged."""
    if HAVE_NUMBA:
        return _numba_njit(cache=True, fastmath=False)(fn)
    return fn


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
