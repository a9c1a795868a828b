"""Exact synthesis of fractional Brownian motion on uniform grids.

Primary route is circulant embedding of the stationary increment process
(FFT, O(n log n), exact when the embedding eigenvalues are nonnegative);
the fallback is Cholesky factorization of the increment covariance (exact,
O(n^3), fine at desk scale). Both routes are exact in law, so every
downstream Monte Carlo test can treat the sampler as ground truth.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SynthesisError
from .rng import stream, DOMAIN_FBM

# Relative tolerance on negative embedding eigenvalues before giving up on
# the FFT route.
EIG_TOL = 1e-10


@dataclass(frozen=True)
class ModelParams:
    """Model triple: Hurst index, reflection fraction, linear drift rate."""

    hurst: float
    gamma: float
    drift: float

    def __post_init__(self):
        if not 0.0 < self.hurst < 1.0:
            raise ValueError(f"hurst must lie in (0,1), got {self.hurst}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0,1], got {self.gamma}")
        if not self.drift > 0.0:
            raise ValueError(f"drift must be positive, got {self.drift}")


@dataclass(frozen=True)
class Grid:
    """Uniform time grid t_i = i * t_max/n_steps, i = 0..n_steps."""

    t_max: float
    n_steps: int

    def __post_init__(self):
        if not self.t_max > 0.0:
            raise ValueError(f"t_max must be positive, got {self.t_max}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def step(self) -> float:
        return self.t_max / self.n_steps

    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.step


@dataclass
class SamplePath:
    """One realization on a grid; values[0] is pinned to 0."""

    grid: Grid
    values: np.ndarray
    hurst: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.grid.n_steps + 1,):
            raise ValueError("values length does not match grid")
        if self.values[0] != 0.0:
            raise ValueError("paths must start at 0")


def fbm_cov(s, t, hurst: float):
    """Covariance (t^{2H} + s^{2H} - |t-s|^{2H}) / 2 at times s, t >= 0.

    Accepts scalars or arrays (broadcasting); symmetric in (s, t).
    """
    if not 0.0 < hurst < 1.0:
        raise ValueError(f"hurst must lie in (0,1), got {hurst}")
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if np.any(s < 0) or np.any(t < 0):
        raise ValueError("times must be nonnegative")
    h2 = 2.0 * hurst
    out = 0.5 * (t**h2 + s**h2 - np.abs(t - s) ** h2)
    return out if out.ndim else float(out)


def fgn_autocov(hurst: float, n_lags: int, step: float = 1.0) -> np.ndarray:
    """Autocovariance of fBm increments over span `step`, lags 0..n_lags."""
    k = np.arange(n_lags + 1, dtype=np.float64)
    h2 = 2.0 * hurst
    g = 0.5 * ((k + 1.0) ** h2 - 2.0 * k**h2 + np.abs(k - 1.0) ** h2)
    return g * step**h2


def _embedding_eigs(acov: np.ndarray) -> np.ndarray | None:
    """Eigenvalues of the circulant embedding of a stationary autocovariance.

    `acov` holds lags 0..n; the embedding has size 2n. Returns None when
    negative eigenvalues exceed tolerance (embedding not usable).
    """
    n = acov.shape[0] - 1
    row = np.concatenate([acov, acov[n - 1 : 0 : -1]])
    eigs = np.fft.fft(row).real
    top = eigs.max()
    if eigs.min() < -EIG_TOL * top:
        return None
    return np.clip(eigs, 0.0, None)


def _circulant_batch(eigs: np.ndarray, rng: np.random.Generator,
                     n_out: int, m: int) -> np.ndarray:
    """Draw m rows of the first n_out coordinates of the embedded process.

    One complex FFT yields two independent rows (real and imaginary parts),
    so batches are generated in pairs.
    """
    big = eigs.shape[0]
    npairs = (m + 1) // 2
    z = rng.standard_normal((npairs, 2, big))
    v = np.sqrt(eigs / big) * (z[:, 0, :] + 1j * z[:, 1, :])
    y = np.fft.fft(v, axis=-1)
    out = np.empty((2 * npairs, n_out), dtype=np.float64)
    out[0::2] = y.real[:, :n_out]
    out[1::2] = y.imag[:, :n_out]
    return out[:m]


def _chol_lower(mat: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise SynthesisError("covariance matrix is not positive definite") from exc


class FgnSampler:
    """Exact fractional Gaussian noise over n uniform steps.

    Precomputes the circulant eigenvalues (or the Cholesky factor of the
    Toeplitz increment covariance when the embedding fails); the factor is
    read-only afterwards and safe to share across threads.
    """

    def __init__(self, hurst: float, n: int, step: float = 1.0):
        if not 0.0 < hurst < 1.0:
            raise ValueError(f"hurst must lie in (0,1), got {hurst}")
        if n < 1:
            raise ValueError("need at least one increment")
        self.hurst = hurst
        self.n = n
        self.step = step
        self._eigs = None
        self._chol = None
        if hurst == 0.5:
            # Brownian case: increments are iid
            self.method = "iid"
            return
        acov = fgn_autocov(hurst, n, step)
        self._eigs = _embedding_eigs(acov)
        if self._eigs is not None:
            self.method = "circulant"
        else:
            self.method = "cholesky"
            idx = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
            self._chol = _chol_lower(acov[idx])

    def sample_batch(self, rng: np.random.Generator, m: int) -> np.ndarray:
        if self.method == "iid":
            out = rng.standard_normal((m, self.n))
            out *= math.sqrt(self.step)
            return out
        if self.method == "circulant":
            return _circulant_batch(self._eigs, rng, self.n, m)
        z = rng.standard_normal((m, self.n))
        return z @ self._chol.T


class FbmSampler:
    """Exact fBm paths on a grid, via cumulated fGn."""

    def __init__(self, hurst: float, grid: Grid):
        self.hurst = hurst
        self.grid = grid
        self._fgn = FgnSampler(hurst, grid.n_steps, grid.step)

    @property
    def method(self) -> str:
        return self._fgn.method

    def sample_batch(self, rng: np.random.Generator, m: int) -> np.ndarray:
        """m paths as rows, shape (m, n_steps+1), column 0 identically 0."""
        fgn = self._fgn.sample_batch(rng, m)
        out = np.empty((m, self.grid.n_steps + 1), dtype=np.float64)
        out[:, 0] = 0.0
        np.cumsum(fgn, axis=1, out=out[:, 1:])
        return out

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.sample_batch(rng, 1)[0]


def sample_fbm(hurst: float, grid: Grid, seed: int) -> SamplePath:
    """One fBm path, deterministic in (hurst, grid, seed)."""
    sampler = FbmSampler(hurst, grid)
    values = sampler.sample(stream(seed, DOMAIN_FBM))
    return SamplePath(grid=grid, values=values, hurst=hurst)


def drifted_batch(params: ModelParams, grid: Grid, sampler: FbmSampler,
                  rng: np.random.Generator, m: int) -> np.ndarray:
    """Batch of drifted input paths X_H(t) - drift*t (rows)."""
    paths = sampler.sample_batch(rng, m)
    paths -= params.drift * grid.times()
    return paths


def sample_drifted_input(params: ModelParams, grid: Grid, seed: int) -> SamplePath:
    """One drifted input path; same stream layout as sample_fbm."""
    sampler = FbmSampler(params.hurst, grid)
    values = drifted_batch(params, grid, sampler, stream(seed, DOMAIN_FBM), 1)[0]
    return SamplePath(grid=grid, values=values, hurst=params.hurst)


class StationarySampler:
    """Exact stationary Gaussian sequence with a given autocovariance row.

    `acov` holds lags 0..n; samples are the n+1 consecutive coordinates.
    Used for processes with correlation exp(-|tau|^alpha) in the exceedance
    estimators.
    """

    def __init__(self, acov: np.ndarray):
        acov = np.asarray(acov, dtype=np.float64)
        if acov.ndim != 1 or acov.shape[0] < 2:
            raise ValueError("need autocovariance at lags 0..n with n >= 1")
        self.n_points = acov.shape[0]
        self._eigs = _embedding_eigs(acov)
        if self._eigs is not None:
            self.method = "circulant"
            self._chol = None
        else:
            self.method = "cholesky"
            n = self.n_points
            idx = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
            self._chol = _chol_lower(acov[idx])

    def sample_batch(self, rng: np.random.Generator, m: int) -> np.ndarray:
        if self.method == "circulant":
            return _circulant_batch(self._eigs, rng, self.n_points, m)
        z = rng.standard_normal((m, self.n_points))
        return z @ self._chol.T


@dataclass(frozen=True)
class AnchoredAxis:
    """Uniform time axis step*i + offset containing the time origin.

    Two-sided paths (needed for truncated Piterbarg constants over [S, T]
    with S < 0) are built by cumulating fGn along the axis and re-anchoring
    at the origin index, which reproduces the two-sided fBm law exactly.
    """

    n_left: int
    n_right: int
    step: float
    times: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_left < 0 or self.n_right < 0 or self.n_left + self.n_right < 1:
            raise ValueError("axis must contain at least one step")
        if not self.step > 0:
            raise ValueError("step must be positive")
        t = (np.arange(self.n_left + self.n_right + 1) - self.n_left) * self.step
        object.__setattr__(self, "times", t)


def anchored_fbm_batch(hurst: float, axis: AnchoredAxis,
                       sampler: FgnSampler, rng: np.random.Generator,
                       m: int) -> np.ndarray:
    """Two-sided fBm rows over the axis, pinned to 0 at the origin index."""
    if sampler.n != axis.n_left + axis.n_right:
        raise ValueError("sampler length does not match axis")
    fgn = sampler.sample_batch(rng, m)
    paths = np.empty((m, sampler.n + 1), dtype=np.float64)
    paths[:, 0] = 0.0
    np.cumsum(fgn, axis=1, out=paths[:, 1:])
    paths -= paths[:, axis.n_left][:, None]
    return paths
