"""Optional numba acceleration.

Set ``OWNNET_DISABLE_NUMBA=1`` to force the pure-numpy kernels even when
numba is importable.
"""
from __future__ import annotations

import os

_DISABLED = os.environ.get("OWNNET_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba ships with the dev environment
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def deco(f):
            return f

        return deco


USE_NUMBA = NUMBA_AVAILABLE and not _DISABLED


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


__all__ = ["njit", "NUMBA_AVAILABLE", "USE_NUMBA", "backend"]
