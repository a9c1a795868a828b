"""Pickands and Piterbarg constants: closed forms and Monte Carlo estimators.

Closed forms exist at alpha in {1, 2}; everything else is estimated from
the defining expectation

    H_alpha[0,T]    = E exp( sup_{[0,T]}  (sqrt(2) B_alpha(t) - t^alpha) )
    P_alpha^a[S,T]  = E exp( sup_{[S,T]}  (sqrt(2) B_alpha(t) - (1+a)|t|^alpha) )

with B_alpha a fractional Brownian motion of Hurst index alpha/2 (the
degenerate line t*Z at alpha = 2). The estimand is heavy-tailed: the deep
excursions that dominate E exp(...) have probability ~ exp(-x) at depth x,
so a horizon T is only resolvable when replicates >> exp(T^alpha). Default
ladders are sized by that coverage rule and every estimate reports a
tail-share diagnostic alongside the exp(30) cap hits.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .errors import BudgetExceededError
from .fbm import AnchoredAxis, FgnSampler, StationarySampler, anchored_fbm_batch
from .gaussian import normal_tail
from .parallel import map_chunks
from .rng import CHUNK, DOMAIN_CONSTANTS, chunk_sizes, stream

# Contribution cap exp(CAP): overflow protection; hits flag an inadequate
# horizon/grid rather than get silently absorbed.
CAP = 30.0
# Resource guard on replicates * grid points per estimate.
DEFAULT_BUDGET = 1 << 34

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class MCBudget:
    """Monte Carlo budget: replicate count, grid resolution, master seed."""

    replicates: int
    seed: int
    grid_points: int = 4096

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.grid_points < 2:
            raise ValueError("grid_points must be >= 2")


@dataclass(frozen=True)
class ConstantSpec:
    """One truncated-constant estimation request."""

    alpha: float
    interval: tuple[float, float]
    mc: MCBudget
    a: float | None = None  # None selects the Pickands penalty t^alpha

    def __post_init__(self):
        if not 0.0 < self.alpha <= 2.0:
            raise ValueError(f"alpha must lie in (0,2], got {self.alpha}")
        lo, hi = self.interval
        if not lo < hi:
            raise ValueError("interval must satisfy lo < hi")
        if self.a is not None and not self.a > 0:
            raise ValueError("Piterbarg weight a must be positive")


@dataclass
class EstimateWithError:
    """Point estimate with standard error and provenance."""

    value: float
    std_error: float
    replicates: int
    method: str  # "closed-form" | "monte-carlo"

    def __post_init__(self):
        if self.method == "closed-form" and self.std_error != 0.0:
            raise ValueError("closed-form estimates carry no error")


@dataclass
class TruncatedEstimate(EstimateWithError):
    """Truncated-constant estimate at the fine grid step.

    `coarse_value` is the doubled-step re-estimate (discretization-bias
    probe); `cap_hits` counts exp(30)-capped contributions; `tail_share` is
    the fraction of the mean carried by the top 1% of contributions (values
    near 1 mean the horizon outruns the replicate budget).
    """

    grid_step: float = float("nan")
    coarse_value: float = float("nan")
    cap_hits: int = 0
    tail_share: float = float("nan")


@dataclass
class LimitEstimate(EstimateWithError):
    """Limit-constant estimate extrapolated over a truncation ladder.

    `ladder` rows are (T, coarse, fine, step-extrapolated) per rung;
    `extrapolation_spread` is the sensitivity used in the reported error.
    """

    ladder: tuple = ()
    extrapolation_spread: float = float("nan")


@dataclass
class ExceedanceEstimate(EstimateWithError):
    """Truncated Pickands constant from high-level exceedance frequencies.

    `ladder` rows are (u, estimate, std_error, hits); the headline value is
    the largest-u rung.
    """

    ladder: tuple = ()


def pickands_closed(alpha: float) -> float | None:
    """Known closed forms: 1 at alpha=1, 1/sqrt(pi) at alpha=2."""
    if not 0.0 < alpha <= 2.0:
        raise ValueError(f"alpha must lie in (0,2], got {alpha}")
    if alpha == 1.0:
        return 1.0
    if alpha == 2.0:
        return 1.0 / math.sqrt(math.pi)
    return None


def piterbarg_closed(alpha: float, a: float) -> float | None:
    """Known closed forms: 1 + 1/a at alpha=1, (1 + sqrt(1+1/a))/2 at alpha=2."""
    if not 0.0 < alpha <= 2.0:
        raise ValueError(f"alpha must lie in (0,2], got {alpha}")
    if not a > 0:
        raise ValueError("Piterbarg weight a must be positive")
    if alpha == 1.0:
        return 1.0 + 1.0 / a
    if alpha == 2.0:
        return 0.5 * (1.0 + math.sqrt(1.0 + 1.0 / a))
    return None


def half_line_piterbarg2(y: float, a: float) -> float:
    """Piterbarg factor at alpha = 2 over the half line (-inf, y]:
    E exp( sup_{t <= y} (sqrt(2) B_2(t) - (1+a) t^2) ).

    B_2(t) = t*Z is the degenerate line, so the expectation reduces to
    one-dimensional Gaussian integrals:

        sqrt(1 + 1/a) * Phi(sqrt(2a(1+a)) y) + exp(-a y^2) Psi(sqrt(2a) y)

    Limits: y -> -inf gives... 0-window? No: y=0 recovers the standard
    one-sided constant (1 + sqrt(1+1/a))/2; y -> +inf gives the two-sided
    constant sqrt(1+1/a).
    """
    if not a > 0:
        raise ValueError("Piterbarg weight a must be positive")
    c1 = math.sqrt(2.0 * a * (1.0 + a)) * y
    c2 = math.sqrt(2.0 * a) * y
    return (math.sqrt(1.0 + 1.0 / a) * float(normal_tail(-c1))
            + math.exp(-a * y * y) * float(normal_tail(c2)))


def _build_axis(lo: float, hi: float, step: float) -> AnchoredAxis:
    """Uniform axis covering [lo, hi] and containing the time origin."""
    n_left = int(round(max(0.0, -lo) / step))
    n_right = max(1, int(round(max(0.0, hi) / step)))
    return AnchoredAxis(n_left=n_left, n_right=n_right, step=step)


def _penalty(alpha: float, a: float | None, times: np.ndarray) -> np.ndarray:
    if a is None:
        return np.abs(times) ** alpha
    return (1.0 + a) * np.abs(times) ** alpha


def penalized_sup_samples(alpha: float, a: float | None, lo: float, hi: float,
                          n_grid: int, cut_times, seed: int, replicates: int,
                          stream_tag: int = 0, budget: int = DEFAULT_BUDGET,
                          threads: int = 1, coarse: bool = False):
    """Per-path penalized running sups over [lo, t] at the given cut times t.

    Returns (sups_fine, sups_coarse or None, actual cut times, fine step);
    sup arrays have shape (replicates, n_cuts). Paths are pinned to 0 at
    the time origin even when the window does not contain it.

    Two built-in variance-coupling devices: the cut mechanism makes every
    ladder rung a prefix of the same sampled paths (monotone pathwise), and
    with `coarse=True` a doubled-step estimate is extracted from the same
    paths by keeping every second grid point (an exact coarse-grid sample),
    so discretization extrapolation runs on common random numbers.
    """
    if coarse:
        if n_grid % 2:
            raise ValueError("coarse subsampling requires an even grid")
        snap = 2
    else:
        snap = 1
    h = (hi - lo) / n_grid
    axis = _build_axis(min(lo, 0.0), max(hi, 0.0), h)
    if replicates * (axis.n_left + axis.n_right) > budget:
        raise BudgetExceededError(
            f"replicates*grid exceeds budget {budget}")
    i0 = int(round((lo - axis.times[0]) / h))
    i1 = int(round((hi - axis.times[0]) / h))
    times_w = axis.times[i0 : i1 + 1]
    penalty = _penalty(alpha, a, times_w)
    cut_times = np.atleast_1d(np.asarray(cut_times, dtype=float))
    cuts = np.rint((cut_times - times_w[0]) / (snap * h)).astype(np.int64) * snap
    if np.any(cuts < 0) or np.any(cuts > i1 - i0):
        raise ValueError("cut times fall outside the sampled interval")
    order = np.argsort(cuts, kind="stable")
    sorted_cuts = cuts[order]

    degenerate = alpha == 2.0
    n_total = axis.n_left + axis.n_right
    sampler = None if degenerate else FgnSampler(alpha / 2.0, n_total, h)
    penalty_c = penalty[::2] if coarse else None

    def worker(k: int, m: int):
        rng = stream(seed, DOMAIN_CONSTANTS, stream_tag, k)
        if degenerate:
            z = rng.standard_normal(m)
            window = z[:, None] * times_w[None, :]
        else:
            paths = anchored_fbm_batch(alpha / 2.0, axis, sampler, rng, m)
            window = paths[:, i0 : i1 + 1]
        fine = backend.weighted_running_sup(window, penalty, sorted_cuts,
                                            scale=SQRT2)
        if not coarse:
            return fine, None
        sub = backend.weighted_running_sup(window[:, ::2], penalty_c,
                                           sorted_cuts // 2, scale=SQRT2)
        return fine, sub

    parts = map_chunks(worker, chunk_sizes(replicates), threads)

    def _gather(idx):
        arr = np.concatenate([p[idx] for p in parts], axis=0)
        out = np.empty_like(arr)
        out[:, order] = arr
        return out

    sups_fine = _gather(0)
    sups_coarse = _gather(1) if coarse else None
    return sups_fine, sups_coarse, times_w[cuts], h


def _expectation(sups: np.ndarray) -> tuple[float, float, int, float]:
    """Mean/SE of exp(sup) with capping and top-1% share diagnostics."""
    capped = np.minimum(sups, CAP)
    y = np.exp(capped)
    n = y.shape[0]
    mean = float(y.mean())
    se = float(y.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
    cap_hits = int(np.count_nonzero(sups > CAP))
    k = max(1, n // 100)
    top = np.partition(y, n - k)[n - k:]
    tail_share = float(top.sum() / y.sum())
    return mean, se, cap_hits, tail_share


def _truncated(spec: ConstantSpec, stream_tag_base: int,
               budget: int, threads: int) -> TruncatedEstimate:
    lo, hi = spec.interval
    n = spec.mc.grid_points + (spec.mc.grid_points % 2)
    sups_f, sups_c, _, step = penalized_sup_samples(
        spec.alpha, spec.a, lo, hi, n, [hi], spec.mc.seed,
        spec.mc.replicates, stream_tag=stream_tag_base, budget=budget,
        threads=threads, coarse=True)
    mean, se, cap_hits, tail_share = _expectation(sups_f[:, 0])
    coarse_mean, _, _, _ = _expectation(sups_c[:, 0])
    est = TruncatedEstimate(
        value=mean, std_error=se, replicates=spec.mc.replicates,
        method="monte-carlo", grid_step=step, coarse_value=coarse_mean,
        cap_hits=cap_hits, tail_share=tail_share)
    if tail_share > 0.5:
        warnings.warn(
            "top-1% contributions carry most of the estimate; the horizon "
            "likely outruns the replicate budget", RuntimeWarning)
    return est


def pickands_truncated(spec: ConstantSpec, budget: int = DEFAULT_BUDGET,
                       threads: int = 1) -> TruncatedEstimate:
    """Monte Carlo estimate of H_alpha[0,T]; interval must start at 0."""
    if spec.a is not None:
        raise ValueError("Pickands spec must not carry a Piterbarg weight")
    if spec.interval[0] != 0.0:
        raise ValueError("Pickands truncation interval must start at 0")
    return _truncated(spec, stream_tag_base=10, budget=budget, threads=threads)


def piterbarg_truncated(spec: ConstantSpec, budget: int = DEFAULT_BUDGET,
                        threads: int = 1) -> TruncatedEstimate:
    """Monte Carlo estimate of P_alpha^a[S,T]; S may be negative."""
    if spec.a is None:
        raise ValueError("Piterbarg spec requires the weight a")
    return _truncated(spec, stream_tag_base=20, budget=budget, threads=threads)


def default_pickands_ladder(alpha: float, replicates: int) -> tuple[float, ...]:
    """Coverage-sized truncation ladder.

    Contributions at excursion depth x have probability ~exp(-x) and the
    horizon T contributes depths up to ~T^alpha. Past depth ln(R/30) the
    heavy tail is invisible to R replicates (the estimate silently biases
    low while its sample SE stays small), so T_max is capped at 75% of the
    coverage depth, to the power 1/alpha.
    """
    depth = min(4.0, 0.5 * math.log(max(replicates, 100) / 30.0))
    t_max = min(8.0, max(2.0, depth ** (1.0 / alpha)))
    return (t_max / 2.0, 0.75 * t_max, t_max)


def _richardson(coarse, fine, alpha: float):
    # sup discretization bias scales like h^(alpha/2); estimates share paths
    r = 2.0 ** (alpha / 2.0)
    return fine + (fine - coarse) / (r - 1.0)


def _ladder_values(alpha: float, a: float | None, t_ladder, mc: MCBudget,
                   budget: int, threads: int):
    """Step-extrapolated ladder values plus per-batch versions.

    One simulation at the fine step; the doubled-step estimate comes from
    the same paths (every second grid point), so the Richardson correction
    is a low-variance common-random-numbers difference.
    """
    t_ladder = tuple(float(t) for t in t_ladder)
    t_max = t_ladder[-1]
    n = mc.grid_points + (mc.grid_points % 2)
    sups_f, sups_c, actual, _ = penalized_sup_samples(
        alpha, a, 0.0, t_max, n, t_ladder, mc.seed, mc.replicates,
        stream_tag=0, budget=budget, threads=threads, coarse=True)
    yf = np.exp(np.minimum(sups_f, CAP))
    yc = np.exp(np.minimum(sups_c, CAP))
    extrap = _richardson(yc.mean(axis=0), yf.mean(axis=0), alpha)
    nb = max(5, min(25, mc.replicates // 40))
    bf = np.array([b.mean(axis=0) for b in np.array_split(yf, nb, axis=0)])
    bc = np.array([b.mean(axis=0) for b in np.array_split(yc, nb, axis=0)])
    batch_extrap = _richardson(bc, bf, alpha)
    return (np.asarray(actual, dtype=float), yc.mean(axis=0), yf.mean(axis=0),
            extrap, batch_extrap)


def _ls_slope(x: np.ndarray, y: np.ndarray) -> float:
    xm = x.mean()
    return float(((x - xm) * (y - y.mean())).sum() / ((x - xm) ** 2).sum())


def pickands_limit_estimate(alpha: float, t_ladder=None,
                            mc: MCBudget | None = None,
                            budget: int = DEFAULT_BUDGET,
                            threads: int = 1) -> LimitEstimate:
    """Estimate the Pickands constant from the truncated-constant ladder.

    Fits the boundary-effect form H_alpha[0,T]/T ~ H + kappa/T; the fit is
    performed as the least-squares slope of H_alpha[0,T] against T (the
    same two-parameter model, weighted by T^2), which keeps the most
    curvature-biased small-T rungs from dominating. Rungs share paths
    (prefix sups) and each is Richardson-extrapolated over a step halving
    on common random numbers. The reported error combines the batch SE of
    the fit with its sensitivity to dropping the smallest rung.
    """
    if not 0.0 < alpha <= 2.0:
        raise ValueError(f"alpha must lie in (0,2], got {alpha}")
    if mc is None:
        # the degenerate alpha=2 sampler has no transform cost, so it can
        # afford a far larger replicate budget in the same wall time
        reps = 5_000_000 if alpha == 2.0 else 1_200_000
        mc = MCBudget(replicates=reps, seed=0, grid_points=1536)
    if t_ladder is None:
        t_ladder = default_pickands_ladder(alpha, mc.replicates)
    if len(t_ladder) < 2:
        raise ValueError("ladder needs at least two truncation horizons")
    ts, coarse, fine, extrap, batch_extrap = _ladder_values(
        alpha, None, t_ladder, mc, budget, threads)

    value = _ls_slope(ts, extrap)
    b_slopes = np.array([_ls_slope(ts, row) for row in batch_extrap])
    nb = b_slopes.shape[0]
    se_stat = float(b_slopes.std(ddof=1) / math.sqrt(nb))
    # curvature probe: refit without the smallest rung; only the part of
    # the shift resolved beyond its own noise counts as model error
    if len(ts) > 2:
        b_drop = np.array([_ls_slope(ts[1:], row[1:]) for row in batch_extrap])
        shift = b_drop - b_slopes
        se_shift = float(shift.std(ddof=1) / math.sqrt(nb))
        spread = max(0.0, abs(float(shift.mean())) - 2.0 * se_shift)
    else:
        spread = abs(value - extrap[-1] / ts[-1])
    err = math.hypot(se_stat, spread)
    if err > 0.1 * abs(value):
        warnings.warn("Pickands limit estimate error exceeds 10%; raise "
                      "replicates or shorten the ladder", RuntimeWarning)
    ladder = tuple(
        (float(t), float(c / t), float(f / t), float(e / t))
        for t, c, f, e in zip(ts, coarse, fine, extrap))
    return LimitEstimate(value=value, std_error=err, replicates=mc.replicates,
                         method="monte-carlo", ladder=ladder,
                         extrapolation_spread=float(spread))


def piterbarg_limit_estimate(alpha: float, a: float, s_ladder=(2.0, 4.0, 8.0),
                             mc: MCBudget | None = None,
                             budget: int = DEFAULT_BUDGET,
                             threads: int = 1) -> LimitEstimate:
    """Estimate P_alpha^a as the largest-S rung of P_alpha^a[0,S].

    P_alpha^a[0,S] converges much faster than O(1/S) (the penalty kills
    excursions beyond moderate S), so no intercept fit: the last rung is
    the value and the last-rung delta feeds the reported error.
    """
    if not a > 0:
        raise ValueError("Piterbarg weight a must be positive")
    if mc is None:
        mc = MCBudget(replicates=200_000, seed=0, grid_points=2048)
    if len(s_ladder) < 2:
        raise ValueError("ladder needs at least two truncation horizons")
    ts, coarse, fine, extrap, batch_extrap = _ladder_values(
        alpha, a, s_ladder, mc, budget, threads)
    value = float(extrap[-1])
    b_last = batch_extrap[:, -1]
    se_stat = float(b_last.std(ddof=1) / math.sqrt(b_last.shape[0]))
    spread = abs(float(extrap[-1] - extrap[-2]))
    err = math.hypot(se_stat, spread)
    ladder = tuple(
        (float(t), float(c), float(f), float(e))
        for t, c, f, e in zip(ts, coarse, fine, extrap))
    return LimitEstimate(value=value, std_error=err, replicates=mc.replicates,
                         method="monte-carlo", ladder=ladder,
                         extrapolation_spread=float(spread))


def pickands_via_exceedance(alpha: float, horizon: float, u_ladder=(3.0, 3.5, 4.0),
                            mc: MCBudget | None = None,
                            budget: int = DEFAULT_BUDGET,
                            threads: int = 1) -> ExceedanceEstimate:
    """Independent estimator of H_alpha[0,T] from exceedance frequencies.

    Samples a stationary Gaussian process with correlation exp(-|tau|^alpha)
    on the shrunken interval [0, u^(-2/alpha) T] and divides the exceedance
    probability of level u by the normal tail at u. Cross-validation oracle
    for the expectation-based estimator; binomial noise, no heavy tails.
    """
    if not 0.0 < alpha <= 2.0:
        raise ValueError(f"alpha must lie in (0,2], got {alpha}")
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if mc is None:
        mc = MCBudget(replicates=200_000, seed=0, grid_points=512)
    rows = []
    for j, u in enumerate(sorted(u_ladder)):
        n = mc.grid_points
        if mc.replicates * n > budget:
            raise BudgetExceededError("replicates*grid exceeds budget")
        length = u ** (-2.0 / alpha) * horizon
        h = length / n
        acov = np.exp(-(np.arange(n + 1) * h) ** alpha)
        sampler = StationarySampler(acov)
        zero = np.zeros(n + 1)

        def worker(k: int, m: int) -> int:
            rng = stream(mc.seed, DOMAIN_CONSTANTS, 30 + j, k)
            vals = sampler.sample_batch(rng, m)
            sups = backend.weighted_sup(vals, zero, scale=1.0)
            return int(np.count_nonzero(sups > u))

        hits = sum(map_chunks(worker, chunk_sizes(mc.replicates), threads))
        p = hits / mc.replicates
        tail = float(normal_tail(u))
        se = math.sqrt(max(p * (1.0 - p), 0.0) / mc.replicates) / tail
        if hits < 50:
            warnings.warn(
                f"only {hits} exceedances at u={u}; estimate unstable",
                RuntimeWarning)
        rows.append((float(u), p / tail, se, hits))
    value_row = rows[-1]
    return ExceedanceEstimate(value=value_row[1], std_error=value_row[2],
                              replicates=mc.replicates, method="monte-carlo",
                              ladder=tuple(rows))


def estimate_record(alpha: float, a: float | None, interval,
                    est: EstimateWithError) -> dict:
    """JSON-ready export of one estimate."""
    return {
        "alpha": alpha,
        "a": a,
        "interval": list(interval) if interval is not None else None,
        "value": est.value,
        "std_error": est.std_error,
        "replicates": est.replicates,
        "grid_step": getattr(est, "grid_step", None),
    }
