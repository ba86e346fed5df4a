"""Backend selection for the hot kernels.

Every kernel in :mod:`adapsne._kernels` has a numba-compiled form and a
pure-numpy counterpart living next to the public API.  The choice is made
once from ``ADAPSNE_NUMBA`` (``0``/``false``/``off`` disables numba) and can
be flipped at runtime with :func:`set_backend`, which the tests and the
benchmark use to run both paths side by side.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

HAVE_NUMBA = numba is not None

if HAVE_NUMBA and "NUMBA_THREADING_LAYER" not in os.environ:
    # an old system TBB only produces a warning before numba falls back anyway
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

_OFF = {"0", "false", "off", "no", "numpy"}
_backend = "numpy" if (not HAVE_NUMBA or os.environ.get("ADAPSNE_NUMBA", "1").strip().lower() in _OFF) else "numba"


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity decorator otherwise."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        # inf/nan like numpy instead of raising, so callers can report where it broke
        kwargs.setdefault("error_model", "numpy")
        return numba.njit(*args, **kwargs)

    def wrap(fn):
        return fn

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return wrap


if HAVE_NUMBA:
    prange = numba.prange
else:
    prange = range


def backend():
    return _backend


def use_numba():
    return _backend == "numba"


def set_backend(name):
    """Select ``"numba"`` or ``"numpy"``; returns the previous backend."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    prev, _backend = _backend, name
    return prev


def set_threads(n):
    """Cap the numba worker pool (no-op on the numpy backend)."""
    if n is None or not HAVE_NUMBA:
        return
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
