"""Backend switch for the compiled kernels.

Set ``SPECMATCH_NUMBA=0`` before import to force the pure-numpy code paths.
"""

import os

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and os.environ.get("SPECMATCH_NUMBA", "1").strip().lower() not in (
    "0",
    "false",
    "no",
    "off",
)


def njit(*args, **kws):
    """``numba.njit`` with caching, or an identity decorator without numba."""
    if not _HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f
    kws.setdefault("cache", True)
    kws.setdefault("nogil", True)
    return numba.njit(*args, **kws)


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
