"""Closed-form asymptotic quantities: normalizers, the variance field of the
scaled exceedance problem, local expansions, ruin-probability and field-sup
approximations, and the Gaussian limit laws for standardized passage times.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .constants import EstimateWithError, pickands_closed, piterbarg_closed
from .errors import EmptyRegionError, NeedsEstimatedConstantError
from .fbm import ModelParams, fbm_cov
from .gaussian import log_normal_tail, normal_cdf, normal_tail


def critical_time(params: ModelParams) -> float:
    """Time (per unit of level) where passage concentrates: H/(c(1-H))."""
    h, c = params.hurst, params.drift
    return h / (c * (1.0 - h))


def passage_spread(params: ModelParams, u: float) -> float:
    """Standardization scale H^{H+1/2} u^H / ((1-H)^{H+1/2} c^{H+1})."""
    if not u > 0:
        raise ValueError("level must be positive")
    h, c = params.hurst, params.drift
    return h ** (h + 0.5) / ((1.0 - h) ** (h + 0.5) * c ** (h + 1.0)) * u**h


def spread_coefficient(params: ModelParams) -> float:
    """u-free spread factor H^{1/2} / (c (1-H)^{3/2})."""
    h, c = params.hurst, params.drift
    return math.sqrt(h) / (c * (1.0 - h) ** 1.5)


def peak_std(params: ModelParams) -> float:
    """Maximum of the field standard deviation: H^H (1-H)^{1-H} / c^H."""
    h, c = params.hurst, params.drift
    return h**h * (1.0 - h) ** (1.0 - h) / c**h


def scaled_level(params: ModelParams, u: float) -> float:
    """Level in units of the peak standard deviation: u^{1-H}/peak_std."""
    if not u > 0:
        raise ValueError("level must be positive")
    return u ** (1.0 - params.hurst) / peak_std(params)


@dataclass(frozen=True)
class ScalingParams:
    """All normalizers for one (model, level) pair."""

    level: float
    critical_time: float
    spread: float
    scaled_level: float
    spread_coefficient: float

    def __post_init__(self):
        for name in ("level", "critical_time", "spread", "scaled_level",
                     "spread_coefficient"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def scaling_params(params: ModelParams, u: float) -> ScalingParams:
    return ScalingParams(
        level=u,
        critical_time=critical_time(params),
        spread=passage_spread(params, u),
        scaled_level=scaled_level(params, u),
        spread_coefficient=spread_coefficient(params),
    )


def field_var(s, t, params: ModelParams):
    """Variance of the scaled exceedance field on {0 <= s <= t}.

    ((1-g) t^{2H} + (g^2-g) s^{2H} + g (t-s)^{2H}) / (1 + c t - c g s)^2
    """
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if np.any(s < 0) or np.any(s > t):
        raise ValueError("require 0 <= s <= t")
    h2 = 2.0 * params.hurst
    g, c = params.gamma, params.drift
    num = (1.0 - g) * t**h2 + (g * g - g) * s**h2 + g * (t - s) ** h2
    den = 1.0 + c * t - c * g * s
    out = num / (den * den)
    return out if out.ndim else float(out)


def field_std(s, t, params: ModelParams):
    """Standard deviation of the scaled exceedance field."""
    return np.sqrt(field_var(s, t, params))


def field_cov(s, t, sp, tp, params: ModelParams):
    """Exact covariance of the scaled exceedance field between two points."""
    g, c = params.gamma, params.drift
    h = params.hurst
    num = (fbm_cov(t, tp, h) - g * fbm_cov(t, sp, h)
           - g * fbm_cov(s, tp, h) + g * g * fbm_cov(s, sp, h))
    return num / ((1.0 + c * (t - g * s)) * (1.0 + c * (tp - g * sp)))


def field_corr(s, t, sp, tp, params: ModelParams):
    """Exact correlation; oracle for the local correlation expansion."""
    cov = field_cov(s, t, sp, tp, params)
    return cov / (field_std(s, t, params) * field_std(sp, tp, params))


def std_drop_expansion(s, t, params: ModelParams) -> float:
    """Leading order of 1 - field_std(s,t)/peak_std near (0, critical time).

    Two branches: the squared term is (t0-t)^2 for H <= 1/2 and
    (t0-t+gamma*s)^2 for H > 1/2; both carry the same s^{2H} term. The
    H = 1/2 boundary uses the first branch.
    """
    h, g, c = params.hurst, params.gamma, params.drift
    t0 = critical_time(params)
    sq = (t0 - t) if h <= 0.5 else (t0 - t + g * s)
    c_t = c * c * (1.0 - h) ** 3 / (2.0 * h)
    c_s = (g - g * g) * (1.0 - h) ** (2 * h) * c ** (2 * h) / (2.0 * h ** (2 * h))
    return c_t * sq * sq + c_s * s ** (2 * h)


def corr_drop_expansion(s, sp, t, tp, params: ModelParams) -> float:
    """Leading order of 1 - field_corr near the peak:
    (|t-t'|^{2H} + gamma^2 |s-s'|^{2H}) / (2 t0^{2H}).
    """
    h, g = params.hurst, params.gamma
    t0 = critical_time(params)
    h2 = 2.0 * h
    return (abs(t - tp) ** h2 + g * g * abs(s - sp) ** h2) / (2.0 * t0**h2)


def passage_limit_cdf(x):
    """Limit CDF of both standardized passage times: standard normal."""
    return normal_cdf(x)


def passage_limit_tail(x):
    """Complement of the limit CDF, exact deep into the tail."""
    return normal_tail(x)


def joint_passage_limit_cdf(x, y):
    """Joint limit CDF of the standardized passage-time pair: Phi(min(x,y)).

    The limit pair is completely dependent (one shared Gaussian), so the
    joint CDF collapses onto the diagonal.
    """
    return normal_cdf(np.minimum(x, y))


@dataclass
class ConstantEstimates:
    """Injected Monte Carlo constants for formulas lacking closed forms."""

    pickands: EstimateWithError
    piterbarg: EstimateWithError


def _resolve_constants(alpha: float, a: float,
                       constants: ConstantEstimates | None,
                       context: str) -> tuple[float, float, float, str]:
    """(pickands, piterbarg, combined relative SE, provenance)."""
    hc = pickands_closed(alpha)
    pc = piterbarg_closed(alpha, a)
    if hc is not None and pc is not None:
        return hc, pc, 0.0, "closed-form"
    if constants is None:
        raise NeedsEstimatedConstantError(
            f"{context}: no closed form at alpha={alpha}; supply Monte Carlo "
            "estimates of the Pickands and Piterbarg constants")
    hcv = constants.pickands.value
    pcv = constants.piterbarg.value
    rel = math.hypot(constants.pickands.std_error / hcv,
                     constants.piterbarg.std_error / pcv)
    return hcv, pcv, rel, "monte-carlo"


def ruin_probability(u: float, params: ModelParams,
                     constants: ConstantEstimates | None = None) -> EstimateWithError:
    """Leading-order P(ruin ever occurs) at level u.

    W(u) * Psi(scaled_level) with
    W(u) = 2^{1/2 - 1/(2H)} sqrt(pi/(H(1-H))) * H_{2H} * P_{2H}^{(1-g)/g}
           * scaled_level^{1/H - 1}.
    Meaningful for large u only; values above 1 are clamped with a warning.
    Evaluated in log space so huge polynomial factors times tiny Gaussian
    tails cannot overflow or underflow.
    """
    if not u > 0:
        raise ValueError("level must be positive")
    h, g = params.hurst, params.gamma
    if not 0.0 < g < 1.0:
        raise ValueError("ruin asymptotics require gamma in (0,1)")
    alpha = 2.0 * h
    hc, pc, rel_se, method = _resolve_constants(
        alpha, (1.0 - g) / g, constants, "ruin probability")
    m = scaled_level(params, u)
    log_w = ((0.5 - 0.5 / h) * math.log(2.0)
             + 0.5 * math.log(math.pi / (h * (1.0 - h)))
             + math.log(hc) + math.log(pc)
             + (1.0 / h - 1.0) * math.log(m))
    log_p = log_w + float(log_normal_tail(m))
    value = math.exp(log_p) if log_p < 0 else 1.0
    if log_p >= 0:
        warnings.warn(
            f"ruin asymptotic exceeds 1 at u={u}; clamped (u too small for "
            "the approximation)", RuntimeWarning)
    return EstimateWithError(value=value, std_error=value * rel_se,
                             replicates=0 if method == "closed-form"
                             else constants.pickands.replicates,
                             method=method)


def ruin_probability_h_half(u: float, params: ModelParams) -> float:
    """Symbolic H=1/2 reduction of the ruin asymptotic: exp(-2cu)/(1-gamma).

    At H=1/2 the constants collapse (H_1=1, P_1^{(1-g)/g}=1/(1-g)) and the
    Mills-ratio asymptote of the normal tail turns W(u)*Psi into this
    leading-order form.
    """
    if params.hurst != 0.5:
        raise ValueError("reduction only valid at hurst = 1/2")
    if not 0.0 < params.gamma < 1.0:
        raise ValueError("require gamma in (0,1)")
    return math.exp(-2.0 * params.drift * u) / (1.0 - params.gamma)


@dataclass(frozen=True)
class FieldSpec:
    """Local geometry of a unit-variance field with an interior peak.

    Standard deviation drops like b1*s^beta + b2*(t-t0)^2 + b3*s*|t-t0| and
    correlation like a1*|ds|^beta + a2*|dt|^beta near the peak (0, t0).
    The cross coefficient b3 is only admissible for beta in (1, 2); beta=1
    is rejected (not covered by the sup asymptotics), beta=2 is handled
    through the closed-form constants.
    """

    beta: float
    b1: float
    b2: float
    t0: float
    b3: float = 0.0
    a1: float = 1.0
    a2: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.beta <= 2.0:
            raise ValueError(f"beta must lie in (0,2], got {self.beta}")
        if self.beta == 1.0:
            raise ValueError("beta = 1 is not covered; use beta in (0,1) or (1,2]")
        for name in ("b1", "b2", "a1", "a2", "t0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.b3 != 0.0 and not 1.0 < self.beta < 2.0:
            raise ValueError("cross coefficient b3 requires beta in (1,2)")
        if not self.b2 + self.b3 / 2.0 > 0:
            raise ValueError("require b2 + b3/2 > 0")


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle [s_lo, s_hi] x [t_lo, t_hi]."""

    s_lo: float
    s_hi: float
    t_lo: float
    t_hi: float

    def __post_init__(self):
        if self.s_lo > self.s_hi or self.t_lo > self.t_hi:
            raise EmptyRegionError(f"rectangle bounds invert: {self}")


def localization_rectangles(u: float, x: float,
                            spec: FieldSpec) -> tuple[Rect, Rect]:
    """The pair of shrinking windows around the peak that carry the sup.

    With d1 = (ln u / u)^{2/beta} and d2 = ln u / u:
      first  = [0, d1] x [t0 - d2, t0 + x/u]
      second = [0, d1] x [t0 + x/u, t0 + d2]
    Requires u > 1; bounds invert (EmptyRegionError) outside |x| <= ln u.
    """
    if not u > 1.0:
        raise ValueError("need u > 1 so that ln u > 0")
    d1 = (math.log(u) / u) ** (2.0 / spec.beta)
    d2 = math.log(u) / u
    t0 = spec.t0
    mid = t0 + x / u
    first = Rect(0.0, d1, t0 - d2, mid)
    second = Rect(0.0, d1, mid, t0 + d2)
    return first, second


def sup_probability_asymptotic(u: float, x: float, spec: FieldSpec,
                               side: str,
                               constants: ConstantEstimates | None = None,
                               remark_b: bool = False) -> EstimateWithError:
    """Leading-order P(sup over a localization window > u).

    sqrt(pi/b2) * a2^{1/beta} * P_beta^{b1/a1} * H_beta * u^{2/beta - 1}
    * Psi(u) * Phi(sqrt(2 b2) x)   (first window; Psi(...) on the second).
    With remark_b the x-factor is replaced by 1 (the x -> infinity regime).
    """
    if side not in ("first", "second"):
        raise ValueError("side must be 'first' or 'second'")
    hc, pc, rel_se, method = _resolve_constants(
        spec.beta, spec.b1 / spec.a1, constants, "field sup asymptotics")
    base = (math.sqrt(math.pi / spec.b2) * spec.a2 ** (1.0 / spec.beta)
            * pc * hc * u ** (2.0 / spec.beta - 1.0) * float(normal_tail(u)))
    if remark_b:
        factor = 1.0
    elif side == "first":
        factor = float(normal_cdf(math.sqrt(2.0 * spec.b2) * x))
    else:
        factor = float(normal_tail(math.sqrt(2.0 * spec.b2) * x))
    value = base * factor
    return EstimateWithError(value=value, std_error=value * rel_se,
                             replicates=0 if method == "closed-form"
                             else constants.pickands.replicates,
                             method=method)
