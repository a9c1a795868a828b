"""Grid-based simulation of the two-parameter Gaussian fields and desk-scale
verification of the sup asymptotics.

Two field families: the scaled exceedance field driven by one fBm path
(exact joint law, no 2-D factorization needed) and the canonical
unit-variance field with separable lag correlation exp(-|ds|^beta - |dt|^beta)
divided by a deterministic local weight. The canonical covariance is a
Kronecker product, so its Cholesky factor is built axis-wise and reused
across all Monte Carlo replicates.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .asymptotics import (
    ConstantEstimates,
    FieldSpec,
    Rect,
    localization_rectangles,
    sup_probability_asymptotic,
)
from .constants import (
    ConstantSpec,
    MCBudget,
    pickands_truncated,
    piterbarg_truncated,
)
from .errors import BudgetExceededError
from .fbm import ModelParams, fbm_cov
from .gaussian import normal_tail
from .parallel import map_chunks
from .rng import DOMAIN_FIELD, chunk_sizes, stream

DEFAULT_POINT_BUDGET = 4096


@dataclass(frozen=True)
class FieldGrid:
    """Rectangular grid: ascending s and t axes."""

    s_points: np.ndarray
    t_points: np.ndarray
    budget: int = DEFAULT_POINT_BUDGET

    def __post_init__(self):
        s = np.asarray(self.s_points, dtype=np.float64)
        t = np.asarray(self.t_points, dtype=np.float64)
        object.__setattr__(self, "s_points", s)
        object.__setattr__(self, "t_points", t)
        for name, ax in (("s_points", s), ("t_points", t)):
            if ax.ndim != 1 or ax.size == 0:
                raise ValueError(f"{name} must be a nonempty vector")
            if ax.size > 1 and np.any(np.diff(ax) <= 0):
                raise ValueError(f"{name} must be strictly ascending")
        if s.size * t.size > self.budget:
            raise BudgetExceededError(
                f"grid has {s.size * t.size} points, budget {self.budget}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.s_points.size, self.t_points.size)


@dataclass
class FieldSample:
    """One field realization on a grid (entries may be NaN where invalid)."""

    grid: FieldGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ValueError("values shape does not match grid")


def _psd_factor(mat: np.ndarray) -> tuple[np.ndarray, str]:
    """Factor F with F F^T = mat; Cholesky, then 1e-12 jitter, then eigh."""
    try:
        return np.linalg.cholesky(mat), "cholesky"
    except np.linalg.LinAlgError:
        pass
    try:
        jittered = mat + 1e-12 * np.eye(mat.shape[0])
        return np.linalg.cholesky(jittered), "cholesky+jitter"
    except np.linalg.LinAlgError:
        w, q = np.linalg.eigh(mat)
        return q * np.sqrt(np.clip(w, 0.0, None)), "eigh-clip"


class ExceedanceFieldSampler:
    """Scaled exceedance field (X(t) - g X(s)) / (1 + c(t - g s)) on a grid.

    Built from one fBm path evaluated at the union of the axes, so the joint
    law on the grid is exact. Entries with s > t are NaN.
    """

    def __init__(self, params: ModelParams, grid: FieldGrid):
        self.params = params
        self.grid = grid
        union = np.union1d(grid.s_points, grid.t_points)
        cov = fbm_cov(union[:, None], union[None, :], params.hurst)
        # fBm covariance at distinct nonzero times is PD; time 0 gives a
        # zero row handled by zeroing that coordinate
        self._union = union
        self._zero_mask = union == 0.0
        reduced = cov[~self._zero_mask][:, ~self._zero_mask]
        self._factor, self.factor_note = _psd_factor(reduced)
        self._s_idx = np.searchsorted(union, grid.s_points)
        self._t_idx = np.searchsorted(union, grid.t_points)
        s = grid.s_points[:, None]
        t = grid.t_points[None, :]
        g, c = params.gamma, params.drift
        self._denom = 1.0 + c * (t - g * s)
        self._invalid = s > t

    def sample_batch(self, rng: np.random.Generator, m: int) -> np.ndarray:
        nu = self._union.size
        x = np.zeros((m, nu))
        z = rng.standard_normal((m, self._factor.shape[1]))
        x[:, ~self._zero_mask] = z @ self._factor.T
        g = self.params.gamma
        vals = (x[:, self._t_idx][:, None, :] - g * x[:, self._s_idx][:, :, None])
        vals /= self._denom
        vals[:, self._invalid] = np.nan
        return vals


def sample_exceedance_field(params: ModelParams, grid: FieldGrid,
                            seed: int) -> FieldSample:
    """One exact realization of the scaled exceedance field."""
    sampler = ExceedanceFieldSampler(params, grid)
    vals = sampler.sample_batch(stream(seed, DOMAIN_FIELD), 1)[0]
    return FieldSample(grid=grid, values=vals)


def canonical_weight(spec: FieldSpec, s_points: np.ndarray,
                     t_points: np.ndarray) -> np.ndarray:
    """(1 + b1 s^beta) (1 + b2 (t-t0)^2 + b3 |t-t0| s) on the grid."""
    s = np.asarray(s_points, dtype=float)[:, None]
    dt = np.abs(np.asarray(t_points, dtype=float)[None, :] - spec.t0)
    return (1.0 + spec.b1 * s**spec.beta) * (1.0 + spec.b2 * dt**2 + spec.b3 * dt * s)


class CanonicalFieldSampler:
    """Unit-variance field with lag correlation exp(-|ds|^b - |dt|^b),
    optionally divided by the deterministic local weight.

    The grid covariance is C_s (x) C_t, so the Cholesky factor is the
    Kronecker product of the axis factors; it is computed once and shared
    (read-only) across replicates and threads.
    """

    def __init__(self, spec: FieldSpec, grid: FieldGrid):
        self.spec = spec
        self.grid = grid
        ds = np.abs(grid.s_points[:, None] - grid.s_points[None, :])
        dt = np.abs(grid.t_points[:, None] - grid.t_points[None, :])
        self._ls, note_s = _psd_factor(np.exp(-(ds**spec.beta)))
        self._lt, note_t = _psd_factor(np.exp(-(dt**spec.beta)))
        self.factor_note = f"s:{note_s},t:{note_t}"
        self._weight = canonical_weight(spec, grid.s_points, grid.t_points)

    def sample_batch(self, rng: np.random.Generator, m: int,
                     weighted: bool = True) -> np.ndarray:
        z = rng.standard_normal((m, self._ls.shape[1], self._lt.shape[1]))
        vals = np.matmul(np.matmul(self._ls, z), self._lt.T)
        if weighted:
            vals /= self._weight
        return vals


def sample_canonical_field(spec: FieldSpec, grid: FieldGrid,
                           seed: int) -> FieldSample:
    """One realization of the weighted canonical field."""
    sampler = CanonicalFieldSampler(spec, grid)
    vals = sampler.sample_batch(stream(seed, DOMAIN_FIELD), 1)[0]
    return FieldSample(grid=grid, values=vals)


def sup_over_region(sample: FieldSample, rect: Rect) -> float:
    """Max of the field over grid points inside the rectangle."""
    s, t = sample.grid.s_points, sample.grid.t_points
    si = (s >= rect.s_lo) & (s <= rect.s_hi)
    ti = (t >= rect.t_lo) & (t <= rect.t_hi)
    if not si.any() or not ti.any():
        raise ValueError("region contains no grid point")
    block = sample.values[np.ix_(si, ti)]
    if np.all(np.isnan(block)):
        raise ValueError("region contains no valid grid point")
    return float(np.nanmax(block))


@dataclass(frozen=True)
class FieldMC:
    """Monte Carlo budget for field verification runs.

    `replicates` is either one count for every level or a per-level
    sequence matching the ladder.
    """

    replicates: object
    seed: int
    points_per_cell: int = 8
    point_budget: int = DEFAULT_POINT_BUDGET

    def __post_init__(self):
        reps = ([self.replicates] if np.isscalar(self.replicates)
                else list(self.replicates))
        if any(int(r) < 1 for r in reps):
            raise ValueError("replicates must be >= 1")
        if self.points_per_cell < 2:
            raise ValueError("points_per_cell must be >= 2")


@dataclass
class VerificationRow:
    """One rung of an empirical-vs-predicted sup-probability ladder."""

    u: float
    side: str
    empirical_p: float
    std_error: float
    predicted_p: float
    predicted_se: float
    hits: int
    refined_delta: float = float("nan")

    @property
    def ratio(self) -> float:
        return self.empirical_p / self.predicted_p if self.predicted_p else math.nan

    def to_json(self) -> dict:
        return {
            "u": self.u, "side": self.side,
            "empirical_p": self.empirical_p, "std_error": self.std_error,
            "predicted_p": self.predicted_p, "predicted_se": self.predicted_se,
            "ratio": self.ratio, "hits": self.hits,
            "refined_delta": self.refined_delta,
        }


@dataclass
class VerificationReport:
    rows: list
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"rows": [r.to_json() for r in self.rows], "notes": list(self.notes)}


def _axis(lo: float, hi: float, step: float, n_cap: int) -> np.ndarray:
    n = min(max(2, int(math.ceil((hi - lo) / step)) + 1), n_cap)
    return np.linspace(lo, hi, n)


def _sup_counts(sampler, seed: int, tag: tuple, replicates: int,
                columns: list, threshold: float, threads: int) -> list[int]:
    """Exceedance counts of the per-replicate sup over column slices."""

    def worker(k: int, m: int):
        rng = stream(seed, DOMAIN_FIELD, *tag, k)
        vals = sampler.sample_batch(rng, m)
        flat_hits = []
        for (j0, j1) in columns:
            block = vals[:, :, j0:j1].reshape(m, -1)
            sups = backend.weighted_sup(block, np.zeros(block.shape[1]))
            flat_hits.append(int(np.count_nonzero(sups > threshold)))
        return flat_hits

    parts = map_chunks(worker, chunk_sizes(replicates), threads)
    return [sum(p[i] for p in parts) for i in range(len(columns))]


def verify_thm21(spec: FieldSpec, x: float, u_ladder, mc: FieldMC,
                 constants: ConstantEstimates | None = None,
                 remark_b: bool = False, threads: int = 1) -> VerificationReport:
    """Empirical vs predicted sup probabilities over both localization
    windows of the canonical field, across a level ladder.

    Grids resolve u^{-2/beta}/points_per_cell per axis (capped by the point
    budget); a step-halved re-run reports the finite-grid delta.
    """
    report = VerificationReport(rows=[])
    replicates = _per_u(mc.replicates, len(tuple(u_ladder)))
    for iu, u in enumerate(u_ladder):
        reps = replicates[iu]
        x_eff = math.sqrt(math.log(u)) if remark_b else x
        first, second = localization_rectangles(u, x_eff, spec)
        preds = {
            side: sup_probability_asymptotic(u, x_eff, spec, side,
                                             constants=constants,
                                             remark_b=remark_b)
            for side in ("first", "second")
        }
        if min(p.value for p in preds.values()) < 10.0 / reps:
            report.notes.append(
                f"u={u}: predicted probability below 10/replicates; "
                "ladder rung may be statistically empty")
        results = {}
        for refined, tag in ((False, 0), (True, 1)):
            cell = u ** (-2.0 / spec.beta)
            step = cell / (mc.points_per_cell * (2 if refined else 1))
            n_cap = int(math.sqrt(mc.point_budget))
            s_axis = _axis(first.s_lo, first.s_hi, step, n_cap)
            t_left = _axis(first.t_lo, first.t_hi, step, n_cap // 2 + 1)
            t_right = _axis(second.t_lo, second.t_hi, step, n_cap // 2 + 1)
            t_axis = np.concatenate([t_left, t_right[1:]])
            grid = FieldGrid(s_axis, t_axis, budget=2 * mc.point_budget)
            sampler = CanonicalFieldSampler(spec, grid)
            j_mid = t_left.size
            cols = [(0, j_mid), (j_mid - 1, t_axis.size)]
            counts = _sup_counts(sampler, mc.seed, (iu, tag), reps, cols,
                                 u, threads)
            results[refined] = [c / reps for c in counts]
        for i, side in enumerate(("first", "second")):
            p_hat = results[False][i]
            se = math.sqrt(max(p_hat * (1 - p_hat), 0.0) / reps)
            report.rows.append(VerificationRow(
                u=float(u), side=side, empirical_p=p_hat, std_error=se,
                predicted_p=preds[side].value,
                predicted_se=preds[side].std_error,
                hits=int(round(p_hat * reps)),
                refined_delta=results[True][i] - p_hat))
    return report


def _per_u(replicates, n_levels: int) -> list[int]:
    if np.isscalar(replicates):
        return [int(replicates)] * n_levels
    reps = [int(r) for r in replicates]
    if len(reps) != n_levels:
        raise ValueError("per-level replicates must match the ladder length")
    return reps


def verify_piterbarg_lemma(alpha1: float, alpha2: float, b1: float, b2: float,
                           s_hi: float, t1: float, t2: float, u_ladder,
                           mc: FieldMC, g=None,
                           threads: int = 1) -> VerificationReport:
    """Two-estimator check of the two-dimensional high-level sup law.

    Left side: Monte Carlo sup of xi(s,t)/((1+b1 s^a1)(1+b2 |t|^a2)) over
    [0, u^{-2/a1} S] x [u^{-2/a2} T1, u^{-2/a2} T2] against level g(u).
    Right side: product of independently estimated truncated constants
    times the normal tail at g(u). b1 = 0 substitutes the Pickands
    truncated constant for the first factor.
    """
    if b1 < 0 or b2 <= 0:
        raise ValueError("require b1 >= 0 and b2 > 0")
    if not t1 < t2:
        raise ValueError("require T1 < T2")
    if g is None:
        g = lambda u: u
    report = VerificationReport(rows=[])
    const_mc = MCBudget(replicates=max(mc.replicates // 4, 20_000),
                        seed=mc.seed + 1)
    if b1 == 0.0:
        c1 = pickands_truncated(
            ConstantSpec(alpha=alpha1, interval=(0.0, s_hi), mc=const_mc),
            threads=threads)
        report.notes.append(
            "b1 = 0: first factor uses the truncated Pickands constant")
    else:
        c1 = piterbarg_truncated(
            ConstantSpec(alpha=alpha1, interval=(0.0, s_hi), mc=const_mc, a=b1),
            threads=threads)
    c2 = piterbarg_truncated(
        ConstantSpec(alpha=alpha2, interval=(t1, t2),
                     mc=MCBudget(replicates=const_mc.replicates,
                                 seed=mc.seed + 2), a=b2),
        threads=threads)
    rel_const = math.hypot(c1.std_error / c1.value, c2.std_error / c2.value)

    replicates = _per_u(mc.replicates, len(tuple(u_ladder)))
    for iu, u in enumerate(u_ladder):
        reps = replicates[iu]
        gu = float(g(u))
        s_axis = np.linspace(0.0, u ** (-2.0 / alpha1) * s_hi,
                             max(2, int(mc.points_per_cell * s_hi) + 1))
        t_axis = np.linspace(u ** (-2.0 / alpha2) * t1,
                             u ** (-2.0 / alpha2) * t2,
                             max(2, int(mc.points_per_cell * (t2 - t1)) + 1))
        grid = FieldGrid(s_axis, t_axis, budget=mc.point_budget)
        sampler = _SeparableWeighted(alpha1, alpha2, b1, b2, grid)
        counts = _sup_counts(sampler, mc.seed, (iu,), reps,
                             [(0, t_axis.size)], gu, threads)
        p_hat = counts[0] / reps
        se = math.sqrt(max(p_hat * (1 - p_hat), 0.0) / reps)
        predicted = c1.value * c2.value * float(normal_tail(gu))
        if predicted < 10.0 / reps:
            report.notes.append(
                f"u={u}: predicted probability below 10/replicates")
        report.rows.append(VerificationRow(
            u=float(u), side="rect", empirical_p=p_hat, std_error=se,
            predicted_p=predicted, predicted_se=predicted * rel_const,
            hits=counts[0]))
    return report


class _SeparableWeighted:
    """Stationary field exp(-|ds|^a1 - |dt|^a2) over a rectangle, divided by
    the product weight (1 + b1 s^a1)(1 + b2 |t|^a2)."""

    def __init__(self, alpha1: float, alpha2: float, b1: float, b2: float,
                 grid: FieldGrid):
        ds = np.abs(grid.s_points[:, None] - grid.s_points[None, :])
        dt = np.abs(grid.t_points[:, None] - grid.t_points[None, :])
        self._ls, _ = _psd_factor(np.exp(-(ds**alpha1)))
        self._lt, _ = _psd_factor(np.exp(-(dt**alpha2)))
        s = grid.s_points[:, None]
        t = np.abs(grid.t_points[None, :])
        self._weight = (1.0 + b1 * s**alpha1) * (1.0 + b2 * t**alpha2)

    def sample_batch(self, rng: np.random.Generator, m: int) -> np.ndarray:
        z = rng.standard_normal((m, self._ls.shape[1], self._lt.shape[1]))
        vals = np.matmul(np.matmul(self._ls, z), self._lt.T)
        vals /= self._weight
        return vals
