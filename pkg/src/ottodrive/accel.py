"""Numeric backend selection.

The hot loops (track rasterization, strided convolution, the advantage
recursion) each exist twice in kernels.py: a numba-compiled loop and a
vectorized numpy fallback. The OTTODRIVE_BACKEND environment variable
("numba" or "numpy") picks the active one at import time; the default
is numba when it imports, numpy otherwise. set_backend() switches at
runtime so tests and the kernel benchmark can exercise both paths in
one process.

The two backends agree to float tolerance, not bitwise; determinism
guarantees hold within a single backend.
"""

import os

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - depends on the environment
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        # Stand-in decorator so kernel modules import without numba.
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


_ENV_VAR = "OTTODRIVE_BACKEND"
_BACKENDS = ("numba", "numpy")
_active = None


def _from_environment():
    requested = os.environ.get(_ENV_VAR, "").strip().lower()
    if requested in _BACKENDS:
        if requested == "numba" and not HAS_NUMBA:
            raise RuntimeError(
                f"{_ENV_VAR}=numba requested but numba is not importable"
            )
        return requested
    return "numba" if HAS_NUMBA else "numpy"


def active_backend():
    global _active
    if _active is None:
        _active = _from_environment()
    return _active


def set_backend(name):
    """Force a backend for the rest of the process (tests, benchmarks)."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; expected one of {_BACKENDS}")
    if name == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    _active = name
