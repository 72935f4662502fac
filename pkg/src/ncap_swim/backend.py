"""Kernel backend selection.

Each hot numeric loop in this package has two twins: a plain-loop version
that numba compiles to machine code, and a vectorized numpy fallback. The
active twin is chosen once at import time from the NCAP_SWIM_BACKEND
environment variable:

    auto   (default) use numba when importable, else fall back to numpy
    numba  require numba, raise if it cannot be imported
    numpy  force the pure-numpy path even when numba is present

Both twins implement identical math; they may differ in the last float ulp
because summation order differs. Determinism holds within a backend.
"""

from __future__ import annotations

import os
import warnings

ENV_VAR = "NCAP_SWIM_BACKEND"
_CHOICES = ("auto", "numba", "numpy")


def _resolve() -> str:
    requested = os.environ.get(ENV_VAR, "auto").strip().lower()
    if requested not in _CHOICES:
        raise ValueError(f"{ENV_VAR} must be one of {_CHOICES}, got {requested!r}")
    if requested == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if requested == "numba":
            raise
        warnings.warn("numba unavailable, using numpy kernel fallback", stacklevel=2)
        return "numpy"
    return "numba"


BACKEND = _resolve()


def active_backend() -> str:
    return BACKEND


def jit(fn):
    """Compile fn with numba when the numba backend is active, else return fn unchanged.

    Used on the loop twins and their helpers so that the numpy backend can
    still call them as ordinary (slow) Python functions in tests.
    """
    if BACKEND == "numba":
        from numba import njit

        return njit(cache=True, fastmath=False)(fn)
    return fn
