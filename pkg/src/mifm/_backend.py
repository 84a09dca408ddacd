"""Numba shim.

Set ``MIFM_DISABLE_NUMBA=1`` to route every hot kernel through the pure-numpy
implementations instead of the compiled ones (useful for debugging and for
platforms where numba is unavailable).
"""
import os

_DISABLED = os.environ.get("MIFM_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

    def njit(*args, **kw):
        if len(args) == 1 and callable(args[0]) and not kw:
            return args[0]
        return lambda f: f


def backend_name():
    return "numba" if HAS_NUMBA else "numpy"
