"""Numba toggle.

Kernels are decorated with :func:`njit` from this module. Setting
``STREAMBOOST_DISABLE_JIT=1`` (or running without numba installed) turns the
decorator into the identity, so the same kernel bodies execute as plain
numpy code.
"""
import os

_FALSEY = {"", "0", "false", "no", "off"}


def _jit_requested():
    return os.environ.get("STREAMBOOST_DISABLE_JIT", "").strip().lower() in _FALSEY


try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

USE_NUMBA = _numba is not None and _jit_requested()


def njit(fn=None, **kwargs):
    """``numba.njit(cache=True)`` when enabled, otherwise a no-op decorator."""
    if fn is None:
        return lambda f: njit(f, **kwargs)
    if not USE_NUMBA:
        return fn
    kwargs.setdefault("cache", True)
    return _numba.njit(**kwargs)(fn)
