"""Numba dispatch.

Kernels in :mod:`movant.kernels` are written once as plain loops. When
``MOVANT_NUMBA`` is unset or truthy and numba imports, they are compiled with
``njit``; with ``MOVANT_NUMBA=0`` the vectorised numpy twins are used instead.
"""

import os

_flag = os.environ.get("MOVANT_NUMBA", "1").strip().lower()
_wanted = _flag not in ("0", "false", "no", "off", "")

try:
    if not _wanted:
        raise ImportError
    from numba import njit as _njit

    has_numba = True
except ImportError:
    has_numba = False

USE_NUMBA = has_numba and _wanted


def njit(func):
    if USE_NUMBA:
        return _njit(cache=True, fastmath=False)(func)
    return func


def backend():
    return "numba" if USE_NUMBA else "numpy"
