"""Numba switch.

Set ``PSTLATTICE_DISABLE_NUMBA=1`` to force the pure-numpy kernels (also used
automatically when numba is not importable).
"""
import os

_FLAG = "PSTLATTICE_DISABLE_NUMBA"

HAVE_NUMBA = False
if os.environ.get(_FLAG, "").strip().lower() not in ("1", "true", "yes", "on"):
    try:
        from numba import njit, prange  # noqa: F401
        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - depends on environment
        pass

if not HAVE_NUMBA:
    prange = range

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f


JIT_OPTS = dict(cache=True, nogil=True, fastmath=False, error_model="numpy")
