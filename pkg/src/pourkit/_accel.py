"""Numba switch.

Set ``POURKIT_DISABLE_NUMBA=1`` to force the pure-numpy kernels. When numba
is missing the numpy path is used regardless.
"""
from __future__ import annotations

import os

_DISABLED = os.environ.get("POURKIT_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    import numba

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE and not _DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator.

    Kernels decorated here are compiled even when ``USE_NUMBA`` is off so the
    benchmark can compare both paths in one process.
    """
    kwargs.setdefault("cache", True)
    if NUMBA_AVAILABLE:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]):
        return args[0]
    return lambda f: f


__all__ = ["NUMBA_AVAILABLE", "USE_NUMBA", "njit"]
