"""Optional numba acceleration.

Set ``QRM_DISABLE_JIT=1`` to run every kernel through its pure-numpy path
(useful for debugging and for environments without numba).
"""

import os

JIT_ENABLED = os.environ.get("QRM_DISABLE_JIT", "").strip().lower() not in ("1", "true", "yes")

try:
    from numba import njit as _numba_njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False
    JIT_ENABLED = False


def njit(func=None, **kwargs):
    """``numba.njit`` with caching on; identity when numba is unavailable."""
    kwargs.setdefault("cache", True)

    def wrap(f):
        if not HAVE_NUMBA:
            return f
        return _numba_njit(**kwargs)(f)

    if func is not None:
        return wrap(func)
    return wrap
