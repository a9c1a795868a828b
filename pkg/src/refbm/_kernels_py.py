"""Pure-NumPy implementations of the hot path kernels.

Mirrors `refbm._kernels` (the Cython core) operation-for-operation; both
apply the same floating-point operations in the same order so results are
bitwise identical between backends.
"""

import numpy as np

NAME = "python"


def prefix_min(x, out):
    """out[i] = min(x[0..i])."""
    np.minimum.accumulate(x, out=out)


def reflect_path(y, gamma, out):
    """out[i] = y[i] - gamma * min(y[0..i])."""
    m = np.minimum.accumulate(y)
    np.subtract(y, gamma * m, out=out)


def passage_scan(w, u):
    """First and last index with w[i] > u (strict), (-1, -1) if none."""
    exceed = w > u
    if not exceed.any():
        return -1, -1
    first = int(np.argmax(exceed))
    last = int(w.shape[0] - 1 - np.argmax(exceed[::-1]))
    return first, last


def reflect_passage_scan(y, gamma, u, first, last, wmax):
    """Fused per-row pass over drifted input paths.

    For each row: w = y - gamma*prefix_min(y); record first/last index with
    w > u (-1 if none) and max(w).
    """
    m = np.minimum.accumulate(y, axis=1)
    w = y - gamma * m
    exceed = w > u
    any_ = exceed.any(axis=1)
    first[:] = np.where(any_, exceed.argmax(axis=1), -1)
    last[:] = np.where(any_, y.shape[1] - 1 - exceed[:, ::-1].argmax(axis=1), -1)
    wmax[:] = w.max(axis=1)


def weighted_sup(v, penalty, scale, out):
    """out[r] = max_j (scale*v[r, j] - penalty[j])."""
    out[:] = (scale * v - penalty).max(axis=1)


def weighted_running_sup(v, penalty, scale, cuts, out):
    """out[r, k] = max_{j <= cuts[k]} (scale*v[r, j] - penalty[j])."""
    running = np.maximum.accumulate(scale * v - penalty, axis=1)
    out[:] = running[:, cuts]


def scaled_sup(v, weights, out):
    """out[r] = max_j (v[r, j] * weights[j])."""
    out[:] = (v * weights).max(axis=1)
