"""Kernel compilation switch.

Hot loops are written once in numba-compatible Python and decorated with
:func:`jit`.  Setting ``FILTANN_DISABLE_JIT=1`` in the environment before
import runs the same functions as plain Python over numpy arrays, which is
slow but useful for debugging and for checking the compiled path.
"""
from __future__ import annotations

import os

JIT_ENABLED = os.environ.get("FILTANN_DISABLE_JIT", "0").lower() not in ("1", "true", "yes")

if JIT_ENABLED:
    try:
        import numba
    except ImportError:  # pragma: no cover - numba is a hard dependency
        JIT_ENABLED = False

if JIT_ENABLED:

    def jit(func=None, *, fastmath=False, inline=False):
        # inline=True splices the body into callers at the numba IR level, which
        # lets reference-count pruning drop per-call array bookkeeping.
        opts = {"inline": "always"} if inline else {}

        def wrap(f):
            return numba.njit(cache=True, nogil=True, fastmath=fastmath, **opts)(f)

        return wrap if func is None else wrap(func)

else:

    def jit(func=None, *, fastmath=False, inline=False):
        return (lambda f: f) if func is None else func


__all__ = ["JIT_ENABLED", "jit"]
