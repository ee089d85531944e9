"""Numba switch.

Kernels in :mod:`fsiplate.kernels` come in two flavours: an ``@njit`` loop
version and a vectorised numpy version. The loop version is used when numba
imports cleanly and ``FSIPLATE_DISABLE_NUMBA`` is unset (or ``0``).
"""
import os

JIT_OPTIONS = {"nogil": True, "cache": True}


def _flag_disabled():
    return os.environ.get("FSIPLATE_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")


try:
    if _flag_disabled():
        raise ImportError("disabled by FSIPLATE_DISABLE_NUMBA")
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via env flag in a subprocess
    _njit = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA


def njit(func):
    """``numba.njit`` with the package options, or identity when numba is off."""
    if _njit is None:
        return func
    return _njit(**JIT_OPTIONS)(func)


def set_backend(name):
    """Select ``"numba"`` or ``"numpy"`` kernels at runtime (used by tests and the benchmark)."""
    global USE_NUMBA
    if name == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend unavailable")
        USE_NUMBA = True
    elif name == "numpy":
        USE_NUMBA = False
    else:
        raise ValueError(f"unknown backend {name!r}")


def backend():
    return "numba" if USE_NUMBA else "numpy"
