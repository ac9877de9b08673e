"""Kernel backend selection.

The compiled extension is used when it imports; setting ``CATARCH_PURE=1``
forces the pure-Python implementation.
"""
import os

from . import _kernels_py

try:
    if os.environ.get("CATARCH_PURE"):
        raise ImportError("pure backend requested")
    from . import _kernels as _fast
except ImportError:
    _fast = None

BACKEND = _fast.BACKEND if _fast is not None else _kernels_py.BACKEND


def rref_int(rows, ncols, backend=None):
    mod = _pick(backend)
    rows = list(rows)
    if mod is _kernels_py:
        return _kernels_py.rref_int(rows, ncols)
    try:
        return mod.rref_int(rows, ncols)
    except OverflowError:
        return _kernels_py.rref_int(rows, ncols)


def orbit_labels(perms, n, backend=None):
    perms = [list(p) for p in perms]
    if not perms:
        return list(range(n))
    return _pick(backend).orbit_labels(perms, n)


def available_backends():
    return ["python"] + (["cython"] if _fast is not None else [])


def _pick(backend):
    if backend is None:
        return _fast or _kernels_py
    if backend == "python":
        return _kernels_py
    if backend == "cython":
        if _fast is None:
            raise RuntimeError("compiled kernels are not built")
        return _fast
    raise ValueError(f"unknown backend {backend!r}")
