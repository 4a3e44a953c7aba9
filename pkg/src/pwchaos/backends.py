"""Kernel backend selection.

The hot inner loops (RK stepping, event polishing, polynomial evaluation)
are written once in plain numpy and compiled with numba when available.
Setting ``PWCHAOS_NO_NUMBA=1`` in the environment forces the pure-numpy
path; an import failure falls back silently.  ``scripts/benchmark_backends.py``
compares the two.
"""

from __future__ import annotations

import os
import warnings

_ENV_FLAG = "PWCHAOS_NO_NUMBA"


def _numba_disabled_by_env() -> bool:
    val = os.environ.get(_ENV_FLAG, "").strip().lower()
    return val not in ("", "0", "false", "no")


USING_NUMBA = False

if not _numba_disabled_by_env():
    try:
        from numba import njit as _njit

        USING_NUMBA = True
    except ImportError:  # pragma: no cover - exercised via env flag instead
        warnings.warn("numba unavailable, using pure-numpy kernels", RuntimeWarning)

if not USING_NUMBA:
    def _njit(*args, **kwargs):
        # identity decorator, tolerant of @njit and @njit(...) forms
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(func):
            return func

        return wrap


def jit(func):
    """Compile ``func`` with numba when enabled, else return it unchanged."""
    if USING_NUMBA:
        return _njit(cache=True, fastmath=False)(func)
    return func


def backend_name() -> str:
    return "numba" if USING_NUMBA else "numpy"
