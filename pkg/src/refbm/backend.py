"""Kernel backend selection: compiled core when available, NumPy otherwise.

The Cython extension is optional; a source checkout without a compiler runs
on `_kernels_py` with identical (bitwise) results. `set_backend` exists for
tests and benchmarks.
"""

import numpy as np

from . import _kernels_py

try:
    from . import _kernels as _default_impl
except ImportError:
    _default_impl = _kernels_py

_impl = _default_impl


def backend_name() -> str:
    return _impl.NAME


def available_backends() -> list[str]:
    names = ["python"]
    if _default_impl is not _kernels_py:
        names.append("cython")
    return names


def set_backend(name: str) -> None:
    global _impl
    if name == "python":
        _impl = _kernels_py
    elif name == "cython" and _default_impl is not _kernels_py:
        _impl = _default_impl
    else:
        raise ValueError(f"backend {name!r} not available")


def _c64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def prefix_min(x) -> np.ndarray:
    x = _c64(x)
    out = np.empty_like(x)
    _impl.prefix_min(x, out)
    return out


def reflect_path(y, gamma: float) -> np.ndarray:
    y = _c64(y)
    out = np.empty_like(y)
    _impl.reflect_path(y, float(gamma), out)
    return out


def passage_scan(w, u: float) -> tuple[int, int]:
    return _impl.passage_scan(_c64(w), float(u))


def reflect_passage_scan(y, gamma: float, u: float):
    """Per-row (first, last, wmax) of the reflected path against level u."""
    y = _c64(np.atleast_2d(y))
    m = y.shape[0]
    first = np.empty(m, dtype=np.int64)
    last = np.empty(m, dtype=np.int64)
    wmax = np.empty(m, dtype=np.float64)
    _impl.reflect_passage_scan(y, float(gamma), float(u), first, last, wmax)
    return first, last, wmax


def weighted_sup(v, penalty, scale: float = 1.0) -> np.ndarray:
    v = _c64(np.atleast_2d(v))
    penalty = _c64(penalty)
    out = np.empty(v.shape[0], dtype=np.float64)
    _impl.weighted_sup(v, penalty, float(scale), out)
    return out


def weighted_running_sup(v, penalty, cuts, scale: float = 1.0) -> np.ndarray:
    """Running sup of scale*v - penalty, sampled at (sorted) cut indices."""
    v = _c64(np.atleast_2d(v))
    penalty = _c64(penalty)
    cuts = np.ascontiguousarray(cuts, dtype=np.int64)
    if cuts.size and (np.any(np.diff(cuts) < 0) or cuts[0] < 0
                      or cuts[-1] >= v.shape[1]):
        raise ValueError("cut indices must be sorted and within the grid")
    out = np.empty((v.shape[0], cuts.shape[0]), dtype=np.float64)
    _impl.weighted_running_sup(v, penalty, float(scale), cuts, out)
    return out


def scaled_sup(v, weights) -> np.ndarray:
    v = _c64(np.atleast_2d(v))
    weights = _c64(weights)
    out = np.empty(v.shape[0], dtype=np.float64)
    _impl.scaled_sup(v, weights, out)
    return out
