"""Monte Carlo campaigns: conditional passage-time sampling, empirical-CDF
distances against the Gaussian limit, ruin-frequency tables, and report
persistence.

Conditioning on ruin is implemented by plain rejection (keep the paths that
ever exceed the level); standardization always uses the exact closed-form
normalizers, never empirical centering. Replicates are chunked with
per-chunk derived streams and reduced in chunk order, so campaigns are
bitwise reproducible for a fixed (seed, config) regardless of threading.
"""

import json
import math
import subprocess
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import backend
from .asymptotics import (
    ConstantEstimates,
    critical_time,
    passage_spread,
    ruin_probability,
)
from .errors import InfeasibleCampaignError, InvalidCampaignError
from .fbm import FbmSampler, Grid, ModelParams, drifted_batch
from .parallel import map_chunks
from .reflect import PassageRecord
from .rng import DOMAIN_PASSAGE, DOMAIN_RUIN, chunk_sizes, stream

# grid step must stay well below the standardization spread
MAX_STEP_OVER_SPREAD = 0.02
# fraction of ruined paths allowed to still exceed the level in the last
# 10% of the horizon before the campaign is invalidated
MAX_HORIZON_TAIL = 0.01

CSV_HEADER = ["u", "n", "accepted", "ks_z1", "ks_z2", "mean_z1", "sd_z1",
              "med_gap"]

# The limit theorems carry no convergence rate, so agreement with the
# Gaussian limit is judged by trends across levels, not by a tolerance at
# any fixed level. Recorded in every report.
TREND_LIMITATION = ("passage-time limit carries no convergence rate; "
                    "acceptance is trend-based across levels")


@dataclass(frozen=True)
class ExperimentConfig:
    """One campaign: model, levels, budget, seeding, output location."""

    model: ModelParams
    levels: tuple[float, ...]
    replicates: int
    master_seed: int
    horizon_factor: float = 3.0
    steps_per_unit: int = 512
    out_dir: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(float(u) for u in self.levels))
        if not self.levels:
            raise ValueError("need at least one level")
        if any(u <= 0 for u in self.levels):
            raise ValueError("levels must be positive")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ValueError("levels must be strictly ascending")
        if self.replicates < 100:
            raise ValueError("replicates must be >= 100")
        if self.master_seed < 0:
            raise ValueError("master_seed must be nonnegative")
        if not self.horizon_factor > 1.0:
            raise ValueError("horizon_factor must exceed 1")
        if self.steps_per_unit < 8:
            raise ValueError("steps_per_unit must be >= 8")


def config_to_json(config: ExperimentConfig) -> dict:
    return {
        "model": {
            "hurst": config.model.hurst,
            "gamma": config.model.gamma,
            "drift": config.model.drift,
        },
        "levels": list(config.levels),
        "replicates": config.replicates,
        "master_seed": config.master_seed,
        "horizon_factor": config.horizon_factor,
        "steps_per_unit": config.steps_per_unit,
        "out_dir": config.out_dir,
    }


def config_from_json(doc: dict) -> ExperimentConfig:
    model = ModelParams(hurst=doc["model"]["hurst"],
                        gamma=doc["model"]["gamma"],
                        drift=doc["model"]["drift"])
    return ExperimentConfig(
        model=model,
        levels=tuple(doc["levels"]),
        replicates=int(doc["replicates"]),
        master_seed=int(doc["master_seed"]),
        horizon_factor=float(doc.get("horizon_factor", 3.0)),
        steps_per_unit=int(doc.get("steps_per_unit", 512)),
        out_dir=doc.get("out_dir"),
    )


@dataclass(frozen=True)
class ConditionalSample:
    """One accepted (ruined) path's standardized passage times."""

    u: float
    z1: float
    z2: float
    raw: PassageRecord

    def __post_init__(self):
        if self.z2 < self.z1 - 1e-12:
            raise ValueError("last passage must not precede first passage")


@dataclass
class LevelResult:
    """Accepted samples and diagnostics for one level."""

    u: float
    z1: np.ndarray
    z2: np.ndarray
    tau1: np.ndarray
    tau2: np.ndarray
    replicates: int
    diagnostics: dict
    valid: bool

    @property
    def accepted(self) -> int:
        return self.z1.size

    def conditional_samples(self):
        for t1, t2, z1, z2 in zip(self.tau1, self.tau2, self.z1, self.z2):
            rec = PassageRecord(tau1=float(t1), tau2=float(t2), ruined=True,
                                level=self.u)
            yield ConditionalSample(u=self.u, z1=float(z1), z2=float(z2), raw=rec)


@dataclass
class PassageCampaign:
    config: ExperimentConfig
    levels: list
    valid: bool

    def summary_rows(self) -> list[dict]:
        rows = []
        for lv in self.levels:
            rows.append({
                "u": lv.u,
                "n": lv.replicates,
                "accepted": lv.accepted,
                "ks_z1": ks_distance(lv.z1, _phi),
                "ks_z2": ks_distance(lv.z2, _phi),
                "mean_z1": float(lv.z1.mean()) if lv.accepted else math.nan,
                "sd_z1": float(lv.z1.std(ddof=1)) if lv.accepted > 1 else math.nan,
                "med_gap": float(np.median(lv.z2 - lv.z1)) if lv.accepted else math.nan,
            })
        return rows


def _phi(x):
    from .gaussian import normal_cdf
    return normal_cdf(x)


def level_grid(config: ExperimentConfig, u: float) -> Grid:
    """Simulation grid for one level: horizon K * t0 * u, fixed density."""
    t0 = critical_time(config.model)
    horizon = config.horizon_factor * t0 * u
    n = int(round(config.steps_per_unit * config.horizon_factor))
    return Grid(t_max=horizon, n_steps=n)


def _check_step(config: ExperimentConfig, grid: Grid, u: float) -> float:
    ratio = grid.step / passage_spread(config.model, u)
    if ratio > MAX_STEP_OVER_SPREAD:
        raise ValueError(
            f"grid step / spread = {ratio:.4f} exceeds {MAX_STEP_OVER_SPREAD}; "
            "raise steps_per_unit")
    return ratio


def predicted_acceptance(config: ExperimentConfig, u: float,
                         constants: ConstantEstimates | None = None) -> float:
    return ruin_probability(u, config.model, constants).value


def run_conditional_passage(config: ExperimentConfig,
                            constants: ConstantEstimates | None = None,
                            threads: int = 1) -> PassageCampaign:
    """Rejection-sampled conditional passage times, standardized by the
    exact normalizers, with feasibility and horizon diagnostics.

    Raises InfeasibleCampaignError when the predicted acceptance leaves
    fewer than 10 expected accepted paths; flags the campaign invalid when
    more than 1% of ruined paths still exceed the level in the final 10%
    of the horizon (the last-passage estimate would be truncation-biased).
    """
    model = config.model
    if not 0.0 < model.gamma < 1.0:
        raise ValueError("conditional experiments require gamma in (0,1)")
    levels = []
    campaign_valid = True
    for iu, u in enumerate(config.levels):
        pred = predicted_acceptance(config, u, constants)
        if pred * config.replicates < 10.0:
            raise InfeasibleCampaignError(
                f"predicted acceptance {pred:.3e} at u={u} yields fewer than "
                f"10 accepted paths from {config.replicates} replicates; "
                "raise replicates or lower u")
        grid = level_grid(config, u)
        step_ratio = _check_step(config, grid, u)
        sampler = FbmSampler(model.hurst, grid)
        t0u = critical_time(model) * u
        spread = passage_spread(model, u)
        horizon_cut = 0.9 * grid.t_max

        def worker(k: int, m: int, _u=u, _iu=iu, _grid=grid, _sampler=sampler):
            rng = stream(config.master_seed, DOMAIN_PASSAGE, _iu, k)
            paths = drifted_batch(model, _grid, _sampler, rng, m)
            first, last, _ = backend.reflect_passage_scan(paths, model.gamma, _u)
            keep = first >= 0
            tau1 = first[keep] * _grid.step
            tau2 = last[keep] * _grid.step
            return tau1, tau2

        parts = map_chunks(worker, chunk_sizes(config.replicates), threads)
        tau1 = np.concatenate([p[0] for p in parts])
        tau2 = np.concatenate([p[1] for p in parts])
        violations = int(np.count_nonzero(tau2 > horizon_cut))
        z1 = (tau1 - t0u) / spread
        z2 = (tau2 - t0u) / spread
        acc = tau1.size
        valid = acc == 0 or violations <= MAX_HORIZON_TAIL * acc
        campaign_valid &= valid
        levels.append(LevelResult(
            u=u, z1=z1, z2=z2, tau1=tau1, tau2=tau2,
            replicates=config.replicates,
            diagnostics={
                "acceptance_rate": acc / config.replicates,
                "predicted_acceptance": pred,
                "horizon_violations": violations,
                "step_over_spread": step_ratio,
                "grid_step": grid.step,
                "horizon": grid.t_max,
            },
            valid=valid))
    return PassageCampaign(config=config, levels=levels, valid=campaign_valid)


def ks_distance(samples, cdf) -> float:
    """Largest |empirical CDF - cdf| over the sorted-sample breakpoints.

    The empirical CDF is evaluated right-continuously at its own
    breakpoints, so the distance of an empirical CDF to itself is 0.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("need at least one sample")
    f_emp = np.arange(1, n + 1) / n
    return float(np.max(np.abs(f_emp - np.asarray(cdf(x), dtype=float))))


def empirical_joint_cdf(z1, z2, x_grid, y_grid) -> np.ndarray:
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    x = np.asarray(x_grid, dtype=float)
    y = np.asarray(y_grid, dtype=float)
    if x.size == 0 or y.size == 0:
        raise ValueError("grids must be nonempty")
    le_x = z1[:, None] <= x[None, :]
    le_y = z2[:, None] <= y[None, :]
    # mean over samples of the AND, for every (x, y) pair
    return le_x.T.astype(float) @ le_y.astype(float) / z1.size


def joint_cdf_distance(z1, z2, x_grid, y_grid, surface=None) -> float:
    """Max abs deviation of the empirical joint CDF from a target surface.

    Default surface is the complete-dependence limit Phi(min(x, y)).
    """
    from .asymptotics import joint_passage_limit_cdf

    if surface is None:
        surface = joint_passage_limit_cdf
    emp = empirical_joint_cdf(z1, z2, x_grid, y_grid)
    x = np.asarray(x_grid, dtype=float)[:, None]
    y = np.asarray(y_grid, dtype=float)[None, :]
    return float(np.max(np.abs(emp - surface(x, y))))


@dataclass
class RuinRow:
    u: float
    empirical_p: float
    std_error: float
    predicted_p: float
    horizon_tail_fraction: float

    @property
    def ratio(self) -> float:
        return self.empirical_p / self.predicted_p if self.predicted_p else math.nan


@dataclass
class RuinTable:
    config: ExperimentConfig
    rows: list

    def to_json(self) -> dict:
        return {
            "rows": [{
                "u": r.u, "empirical_p": r.empirical_p,
                "std_error": r.std_error, "predicted_p": r.predicted_p,
                "ratio": r.ratio,
                "horizon_tail_fraction": r.horizon_tail_fraction,
            } for r in self.rows],
        }


def ruin_frequency_experiment(config: ExperimentConfig,
                              constants: ConstantEstimates | None = None,
                              threads: int = 1) -> RuinTable:
    """Empirical ruin frequency per level against the closed-form prediction.

    All levels are evaluated on the same paths (grid sized by the largest
    level), so the exceedance sets nest pathwise and the empirical
    frequencies are monotone in u by construction.
    """
    model = config.model
    u_max = config.levels[-1]
    grid = level_grid(config, u_max)
    for u in config.levels:
        _check_step(config, grid, u)
    sampler = FbmSampler(model.hurst, grid)
    horizon_cut = 0.9 * grid.t_max
    n_levels = len(config.levels)

    def worker(k: int, m: int):
        rng = stream(config.master_seed, DOMAIN_RUIN, k)
        paths = drifted_batch(model, grid, sampler, rng, m)
        hits = np.empty(n_levels, dtype=np.int64)
        tail = np.empty(n_levels, dtype=np.int64)
        for i, u in enumerate(config.levels):
            first, last, _ = backend.reflect_passage_scan(paths, model.gamma, u)
            keep = first >= 0
            hits[i] = int(np.count_nonzero(keep))
            tail[i] = int(np.count_nonzero(last[keep] * grid.step > horizon_cut))
        return hits, tail

    parts = map_chunks(worker, chunk_sizes(config.replicates), threads)
    hits = np.sum([p[0] for p in parts], axis=0)
    tails = np.sum([p[1] for p in parts], axis=0)
    rows = []
    for i, u in enumerate(config.levels):
        p_hat = hits[i] / config.replicates
        se = math.sqrt(max(p_hat * (1 - p_hat), 0.0) / config.replicates)
        pred = ruin_probability(u, model, constants).value
        rows.append(RuinRow(
            u=u, empirical_p=float(p_hat), std_error=se, predicted_p=pred,
            horizon_tail_fraction=float(tails[i] / hits[i]) if hits[i] else 0.0))
    return RuinTable(config=config, rows=rows)


@dataclass
class GammaInvarianceReport:
    """Limit-law negative control: the Gaussian limit must not move with
    gamma even though acceptance rates do."""

    u: float
    gammas: tuple[float, float]
    ks_means: tuple[float, float]
    ks_bands: tuple[tuple[float, float], tuple[float, float]]
    acceptance_rates: tuple[float, float]
    predicted_acceptance: tuple[float, float]

    @property
    def bands_overlap(self) -> bool:
        (lo1, hi1), (lo2, hi2) = self.ks_bands
        return lo1 <= hi2 and lo2 <= hi1


def gamma_invariance_report(model: ModelParams, u: float, gammas,
                            replicates: int, master_seed: int, n_seeds: int = 10,
                            constants_by_gamma=None,
                            threads: int = 1) -> GammaInvarianceReport:
    """Run the same conditional experiment at two reflection fractions and
    compare KS-to-Gaussian bands (95%) and acceptance rates."""
    g_a, g_b = gammas
    ks = {g: [] for g in gammas}
    acc = {g: [] for g in gammas}
    pred = {}
    for gi, g in enumerate(gammas):
        m = ModelParams(hurst=model.hurst, gamma=g, drift=model.drift)
        constants = constants_by_gamma[gi] if constants_by_gamma else None
        for j in range(n_seeds):
            cfg = ExperimentConfig(model=m, levels=(u,), replicates=replicates,
                                   master_seed=master_seed + 1000 * j)
            camp = run_conditional_passage(cfg, constants=constants,
                                           threads=threads)
            lv = camp.levels[0]
            ks[g].append(ks_distance(lv.z1, _phi))
            acc[g].append(lv.diagnostics["acceptance_rate"])
        pred[g] = predicted_acceptance(
            ExperimentConfig(model=m, levels=(u,), replicates=replicates,
                             master_seed=master_seed), u, constants)
    means, bands, rates = [], [], []
    for g in gammas:
        arr = np.asarray(ks[g])
        mu = float(arr.mean())
        half = 1.96 * float(arr.std(ddof=1)) / math.sqrt(arr.size)
        means.append(mu)
        bands.append((mu - half, mu + half))
        rates.append(float(np.mean(acc[g])))
    return GammaInvarianceReport(
        u=u, gammas=(g_a, g_b), ks_means=tuple(means),
        ks_bands=tuple(bands), acceptance_rates=tuple(rates),
        predicted_acceptance=(pred[g_a], pred[g_b]))


def _git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent, capture_output=True,
            text=True, timeout=10)
        if out.returncode == 0:
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return "unknown"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def write_report(campaign: PassageCampaign, out_dir,
                 write_samples: bool = False,
                 zero_timestamp: bool = False) -> dict[str, Path]:
    """Persist report.csv (fixed header contract), report.json, and
    optionally samples_u<level>.csv files. Byte-identical for a fixed
    (config, seed) modulo the timestamp field."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {}
        csv_path = out / "report.csv"
        lines = [",".join(CSV_HEADER)]
        for row in campaign.summary_rows():
            lines.append(",".join(_fmt(row[k]) for k in CSV_HEADER))
        csv_path.write_text("\n".join(lines) + "\n")
        paths["csv"] = csv_path

        stamp = ("1970-01-01T00:00:00+00:00" if zero_timestamp
                 else datetime.now(timezone.utc).isoformat())
        doc = {
            "config": config_to_json(campaign.config),
            "master_seed": campaign.config.master_seed,
            "valid": campaign.valid,
            "diagnostics": {_fmt(lv.u): lv.diagnostics for lv in campaign.levels},
            "summary": campaign.summary_rows(),
            "limitations": [TREND_LIMITATION],
            "code_version": _git_describe(),
            "timestamp": stamp,
        }
        json_path = out / "report.json"
        json_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        paths["json"] = json_path

        if write_samples:
            for lv in campaign.levels:
                sp = out / f"samples_u{lv.u:g}.csv"
                rows = ["z1,z2"] + [f"{a:.12g},{b:.12g}"
                                    for a, b in zip(lv.z1, lv.z2)]
                sp.write_text("\n".join(rows) + "\n")
                paths[f"samples_u{lv.u:g}"] = sp
        return paths
    except OSError as exc:
        raise OSError(f"cannot write report under {out}: {exc}") from exc


def write_ruin_report(table: RuinTable, out_dir,
                      zero_timestamp: bool = False) -> dict[str, Path]:
    """Persist ruin_freq.csv and report.json for a ruin-frequency table."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / "ruin_freq.csv"
        header = ["u", "empirical_p", "std_error", "predicted_p", "ratio"]
        lines = [",".join(header)]
        for r in table.rows:
            lines.append(",".join(_fmt(v) for v in
                                  (r.u, r.empirical_p, r.std_error,
                                   r.predicted_p, r.ratio)))
        csv_path.write_text("\n".join(lines) + "\n")
        stamp = ("1970-01-01T00:00:00+00:00" if zero_timestamp
                 else datetime.now(timezone.utc).isoformat())
        doc = {
            "config": config_to_json(table.config),
            "table": table.to_json(),
            "limitations": [TREND_LIMITATION],
            "code_version": _git_describe(),
            "timestamp": stamp,
        }
        json_path = out / "report.json"
        json_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return {"csv": csv_path, "json": json_path}
    except OSError as exc:
        raise OSError(f"cannot write report under {out}: {exc}") from exc
