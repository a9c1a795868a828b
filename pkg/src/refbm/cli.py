"""Command-line interface.

Subcommands: formulas, passage, ruin-freq, constants, field verify-thm21,
field verify-piterbarg, sample-path. Every stochastic subcommand requires
--seed and is bitwise reproducible given (seed, config). Exit codes:
0 success, 1 usage, 2 infeasible campaign, 3 invalidated campaign, 4 I/O.
"""

import argparse
import json
import os
import sys
from pathlib import Path

from . import asymptotics as asy
from . import constants as consts
from .errors import InfeasibleCampaignError, InvalidCampaignError
from .fbm import Grid, ModelParams, sample_drifted_input
from .fieldlab import FieldMC, verify_piterbarg_lemma, verify_thm21
from .harness import (
    ExperimentConfig,
    config_from_json,
    ruin_frequency_experiment,
    run_conditional_passage,
    write_report,
    write_ruin_report,
)
from .reflect import reflect

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_INVALID = 3
EXIT_IO = 4


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    """argparse with exit code 1 on usage errors and stable help width."""

    def __init__(self, *args, **kwargs):
        kwargs.setdefault(
            "formatter_class",
            lambda prog: argparse.HelpFormatter(prog, width=96))
        super().__init__(*args, **kwargs)

    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _positive(name):
    def conv(text):
        v = float(text)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"{name} must be positive")
        return v
    return conv


def _hurst(text):
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError("--hurst must lie in (0,1)")
    return v


def _gamma_open(text):
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError("--gamma must lie in (0,1)")
    return v


def _gamma_closed(text):
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError("--gamma must lie in [0,1]")
    return v


def _float_list(text):
    try:
        vals = tuple(float(tok) for tok in text.split(",") if tok)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad list {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("list must be nonempty")
    return vals


def _seed(text):
    v = int(text)
    if v < 0 or v >= 1 << 64:
        raise argparse.ArgumentTypeError("--seed must be an unsigned 64-bit integer")
    return v


def _common_flags(p: Parser):
    p.add_argument("--seed", type=_seed, default=None,
                   help="master seed (unsigned 64-bit); required for any "
                        "stochastic subcommand")
    p.add_argument("--out", type=Path, default=None,
                   help="output directory for report files")
    p.add_argument("--threads", type=int, default=None,
                   help="worker thread cap (default: machine parallelism)")
    p.add_argument("--config", type=Path, default=None,
                   help="JSON config file; flags override file values")
    p.add_argument("--quiet", action="store_true",
                   help="suppress progress/summary prints")


def build_parser() -> Parser:
    top = Parser(prog="refbm",
                 description="gamma-reflected fBm passage-time laboratory")
    sub = top.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("formulas",
                       help="print closed-form normalizers and the ruin "
                            "approximation")
    p.add_argument("--hurst", type=_hurst, required=True,
                   help="Hurst index in (0,1), dimensionless")
    p.add_argument("--gamma", type=_gamma_open, required=True,
                   help="reflection fraction in (0,1), dimensionless")
    p.add_argument("--c", type=_positive("--c"), required=True,
                   help="drift rate, level units per time unit")
    p.add_argument("--u", type=_positive("--u"), required=True,
                   help="level (threshold), level units")
    p.add_argument("--pickands", type=float, default=None,
                   help="injected Pickands constant estimate (dimensionless)")
    p.add_argument("--piterbarg", type=float, default=None,
                   help="injected Piterbarg constant estimate (dimensionless)")
    p.add_argument("--constants-replicates", type=int, default=20000,
                   help="replicates for auto-estimated constants")
    _common_flags(p)

    p = sub.add_parser("sample-path",
                       help="simulate one reflected path and write t,input,reflected CSV")
    p.add_argument("--hurst", type=_hurst, required=True,
                   help="Hurst index in (0,1), dimensionless")
    p.add_argument("--gamma", type=_gamma_closed, required=True,
                   help="reflection fraction in [0,1], dimensionless")
    p.add_argument("--c", type=_positive("--c"), required=True,
                   help="drift rate, level units per time unit")
    p.add_argument("--t-max", type=_positive("--t-max"), required=True,
                   help="horizon, time units")
    p.add_argument("--n-steps", type=int, required=True,
                   help="number of grid intervals (>=1)")
    _common_flags(p)

    for name, help_ in (("passage", "conditional passage-time campaign"),
                        ("ruin-freq", "ruin-frequency table vs prediction")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--hurst", type=_hurst, default=None,
                       help="Hurst index in (0,1), dimensionless")
        p.add_argument("--gamma", type=_gamma_open, default=None,
                       help="reflection fraction in (0,1), dimensionless")
        p.add_argument("--c", type=_positive("--c"), default=None,
                       help="drift rate, level units per time unit")
        p.add_argument("--levels", type=_float_list, default=None,
                       help="comma-separated ascending levels, level units")
        p.add_argument("--replicates", type=int, default=None,
                       help="Monte Carlo replicates per level (>=100)")
        p.add_argument("--horizon-factor", type=float, default=None,
                       help="simulation horizon in units of critical_time*u "
                            "(default 3)")
        p.add_argument("--steps-per-unit", type=int, default=None,
                       help="grid steps per unit of critical_time*u "
                            "(default 512)")
        p.add_argument("--write-samples", action="store_true",
                       help="also write samples_u<level>.csv files (passage only)")
        _common_flags(p)

    p = sub.add_parser("constants",
                       help="closed forms and Monte Carlo estimates of the "
                            "high-exceedance constants")
    p.add_argument("--alpha", type=float, required=True,
                   help="constant index in (0,2], dimensionless")
    p.add_argument("--a", type=float, default=None,
                   help="Piterbarg weight a > 0 (omit for the Pickands constant)")
    p.add_argument("--replicates", type=int, default=200_000,
                   help="Monte Carlo replicates")
    p.add_argument("--grid-points", type=int, default=2048,
                   help="grid intervals across the truncation horizon")
    p.add_argument("--ladder", type=_float_list, default=None,
                   help="comma-separated truncation horizons (time units)")
    p.add_argument("--cross-check", action="store_true",
                   help="also run the exceedance-frequency estimator "
                        "(Pickands only)")
    _common_flags(p)

    p = sub.add_parser("field", help="two-parameter Gaussian field checks")
    fsub = p.add_subparsers(dest="field_command", metavar="check")

    q = fsub.add_parser("verify-thm21",
                        help="empirical vs predicted sup probabilities over "
                             "the localization windows")
    q.add_argument("--beta", type=float, default=2.0,
                   help="local exponent in (0,2], not 1, dimensionless")
    q.add_argument("--b1", type=float, default=1.0, help="s-direction std drop coefficient")
    q.add_argument("--b2", type=float, default=1.0, help="t-direction std drop coefficient")
    q.add_argument("--b3", type=float, default=0.0,
                   help="cross std drop coefficient (beta in (1,2) only)")
    q.add_argument("--a1", type=float, default=1.0, help="s-direction correlation coefficient")
    q.add_argument("--a2", type=float, default=1.0, help="t-direction correlation coefficient")
    q.add_argument("--t0", type=float, default=1.0, help="peak location, time units")
    q.add_argument("--x", type=float, default=None,
                   help="window split offset (standardized units)")
    q.add_argument("--remark-b", action="store_true",
                   help="growing-x regime: the x-factor is replaced by 1")
    q.add_argument("--u-ladder", type=_float_list, default=(2.5, 3.0, 3.5),
                   help="comma-separated levels")
    q.add_argument("--replicates", type=int, default=200_000,
                   help="Monte Carlo replicates per level")
    q.add_argument("--points-per-cell", type=int, default=8,
                   help="grid points per local scale per axis")
    _common_flags(q)

    q = fsub.add_parser("verify-piterbarg",
                        help="two-estimator check of the rectangle sup law")
    q.add_argument("--alpha1", type=float, default=1.0, help="s-axis exponent in (0,2]")
    q.add_argument("--alpha2", type=float, default=1.0, help="t-axis exponent in (0,2]")
    q.add_argument("--b1", type=float, default=0.5,
                   help="s-axis weight coefficient (>= 0; 0 switches to the "
                        "Pickands constant)")
    q.add_argument("--b2", type=float, default=1.0, help="t-axis weight coefficient (> 0)")
    q.add_argument("--S", dest="s_hi", type=float, default=2.0,
                   help="s-window size (standardized units)")
    q.add_argument("--T1", dest="t1", type=float, default=0.0,
                   help="t-window lower end (standardized units)")
    q.add_argument("--T2", dest="t2", type=float, default=2.0,
                   help="t-window upper end (standardized units)")
    q.add_argument("--u-ladder", type=_float_list, default=(3.0, 3.5, 4.0),
                   help="comma-separated levels")
    q.add_argument("--replicates", type=int, default=400_000,
                   help="Monte Carlo replicates per level")
    q.add_argument("--points-per-cell", type=int, default=8,
                   help="grid points per local scale per axis")
    _common_flags(q)

    return top


def _fmt6(v: float) -> str:
    return f"{v:.6g}"


def _say(args, msg: str):
    if not getattr(args, "quiet", False):
        print(msg)


def _threads(args) -> int:
    if args.threads is not None:
        if args.threads < 1:
            raise UsageError("refbm: error: --threads must be >= 1")
        return args.threads
    return os.cpu_count() or 1


def _need_seed(args):
    if args.seed is None:
        raise UsageError("refbm: error: --seed is required for stochastic "
                         "subcommands")
    return args.seed


def _auto_constants(hurst: float, gamma: float, seed: int, replicates: int,
                    threads: int) -> tuple[asy.ConstantEstimates | None, str]:
    """Closed forms when 2H is 1 or 2, otherwise seeded MC estimates."""
    alpha = 2.0 * hurst
    if consts.pickands_closed(alpha) is not None:
        return None, "closed-form"
    mc = consts.MCBudget(replicates=replicates, seed=seed + 977)
    pick = consts.pickands_limit_estimate(alpha, mc=mc, threads=threads)
    piter = consts.piterbarg_limit_estimate(alpha, (1.0 - gamma) / gamma,
                                            mc=mc, threads=threads)
    est = asy.ConstantEstimates(pickands=pick, piterbarg=piter)
    prov = (f"monte-carlo (pickands {pick.value:.6g}±{pick.std_error:.2g}, "
            f"piterbarg {piter.value:.6g}±{piter.std_error:.2g})")
    return est, prov


def cmd_formulas(args) -> int:
    params = ModelParams(hurst=args.hurst, gamma=args.gamma, drift=args.c)
    sp = asy.scaling_params(params, args.u)
    provenance = "closed-form"
    constants = None
    if args.pickands is not None or args.piterbarg is not None:
        if args.pickands is None or args.piterbarg is None:
            raise UsageError("refbm: error: --pickands and --piterbarg must "
                             "be supplied together")
        constants = asy.ConstantEstimates(
            pickands=consts.EstimateWithError(args.pickands, 0.0, 0, "monte-carlo"),
            piterbarg=consts.EstimateWithError(args.piterbarg, 0.0, 0, "monte-carlo"))
        provenance = "injected"
    elif consts.pickands_closed(2.0 * args.hurst) is None:
        seed = _need_seed(args)
        constants, provenance = _auto_constants(
            args.hurst, args.gamma, seed, args.constants_replicates,
            _threads(args))
    ruin = asy.ruin_probability(args.u, params, constants)
    print(f"critical_time    {_fmt6(sp.critical_time)}")
    print(f"passage_spread   {_fmt6(sp.spread)}")
    print(f"peak_std         {_fmt6(asy.peak_std(params))}")
    print(f"scaled_level     {_fmt6(sp.scaled_level)}")
    print(f"ruin_probability {_fmt6(ruin.value)}   [constants: {provenance}]")
    if args.out is not None:
        doc = {
            "critical_time": sp.critical_time,
            "passage_spread": sp.spread,
            "peak_std": asy.peak_std(params),
            "scaled_level": sp.scaled_level,
            "ruin_probability": ruin.value,
            "ruin_probability_se": ruin.std_error,
            "constants": provenance,
        }
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "formulas.json").write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_sample_path(args) -> int:
    seed = _need_seed(args)
    params = ModelParams(hurst=args.hurst, gamma=args.gamma, drift=args.c)
    if args.n_steps < 1:
        raise UsageError("refbm: error: --n-steps must be >= 1")
    grid = Grid(t_max=args.t_max, n_steps=args.n_steps)
    y = sample_drifted_input(params, grid, seed)
    w = reflect(y, params.gamma)
    out = args.out or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    path = out / "path.csv"
    t = grid.times()
    lines = ["t,input,reflected"]
    lines += [f"{a:.12g},{b:.12g},{c:.12g}" for a, b, c in zip(t, y.values, w.values)]
    path.write_text("\n".join(lines) + "\n")
    _say(args, f"wrote {path} (max reflected value {_fmt6(float(w.values.max()))})")
    return EXIT_OK


def _campaign_config(args) -> ExperimentConfig:
    doc = {}
    if args.config is not None:
        try:
            doc = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise OSError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"refbm: error: bad JSON config: {exc}") from exc
    model = doc.get("model", {})
    hurst = args.hurst if args.hurst is not None else model.get("hurst")
    gamma = args.gamma if args.gamma is not None else model.get("gamma")
    drift = args.c if args.c is not None else model.get("drift")
    levels = args.levels if args.levels is not None else doc.get("levels")
    reps = args.replicates if args.replicates is not None else doc.get("replicates")
    seed = args.seed if args.seed is not None else doc.get("master_seed")
    horizon = (args.horizon_factor if args.horizon_factor is not None
               else doc.get("horizon_factor", 3.0))
    steps = (args.steps_per_unit if args.steps_per_unit is not None
             else doc.get("steps_per_unit", 512))
    missing = [name for name, v in (("--hurst", hurst), ("--gamma", gamma),
                                    ("--c", drift), ("--levels", levels),
                                    ("--replicates", reps), ("--seed", seed))
               if v is None]
    if missing:
        raise UsageError("refbm: error: missing required settings: "
                         + ", ".join(missing))
    try:
        return ExperimentConfig(
            model=ModelParams(hurst=hurst, gamma=gamma, drift=drift),
            levels=tuple(levels), replicates=int(reps), master_seed=int(seed),
            horizon_factor=float(horizon), steps_per_unit=int(steps),
            out_dir=str(args.out) if args.out else doc.get("out_dir"))
    except ValueError as exc:
        raise UsageError(f"refbm: error: {exc}") from exc


def cmd_passage(args) -> int:
    config = _campaign_config(args)
    threads = _threads(args)
    constants, _ = _auto_constants(config.model.hurst, config.model.gamma,
                                   config.master_seed, 20_000, threads)
    campaign = run_conditional_passage(config, constants=constants,
                                       threads=threads)
    out = Path(config.out_dir) if config.out_dir else Path(".")
    zero = bool(os.environ.get("REFBM_ZERO_TIMESTAMP"))
    paths = write_report(campaign, out, write_samples=args.write_samples,
                         zero_timestamp=zero)
    for row in campaign.summary_rows():
        _say(args, f"u={_fmt6(row['u'])}: accepted {row['accepted']}/{row['n']}"
                   f" ks_z1={_fmt6(row['ks_z1'])} med_gap={_fmt6(row['med_gap'])}")
    _say(args, f"wrote {paths['csv']} and {paths['json']}")
    if not campaign.valid:
        print("campaign INVALID: horizon violations exceeded 1% of ruined "
              "paths", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def cmd_ruin_freq(args) -> int:
    config = _campaign_config(args)
    threads = _threads(args)
    constants, _ = _auto_constants(config.model.hurst, config.model.gamma,
                                   config.master_seed, 20_000, threads)
    table = ruin_frequency_experiment(config, constants=constants,
                                      threads=threads)
    out = Path(config.out_dir) if config.out_dir else Path(".")
    zero = bool(os.environ.get("REFBM_ZERO_TIMESTAMP"))
    paths = write_ruin_report(table, out, zero_timestamp=zero)
    for r in table.rows:
        _say(args, f"u={_fmt6(r.u)}: empirical={_fmt6(r.empirical_p)} "
                   f"predicted={_fmt6(r.predicted_p)} ratio={_fmt6(r.ratio)}")
    _say(args, f"wrote {paths['csv']} and {paths['json']}")
    return EXIT_OK


def cmd_constants(args) -> int:
    seed = _need_seed(args)
    threads = _threads(args)
    if not 0.0 < args.alpha <= 2.0:
        raise UsageError("refbm: error: --alpha must lie in (0,2]")
    if args.a is not None and not args.a > 0:
        raise UsageError("refbm: error: --a must be positive")
    mc = consts.MCBudget(replicates=args.replicates, seed=seed,
                         grid_points=args.grid_points)
    record: dict = {"alpha": args.alpha, "a": args.a}
    if args.a is None:
        closed = consts.pickands_closed(args.alpha)
        est = consts.pickands_limit_estimate(args.alpha, t_ladder=args.ladder,
                                             mc=mc, threads=threads)
    else:
        closed = consts.piterbarg_closed(args.alpha, args.a)
        est = consts.piterbarg_limit_estimate(args.alpha, args.a,
                                              s_ladder=args.ladder or (2.0, 4.0, 8.0),
                                              mc=mc, threads=threads)
    if closed is not None:
        record["closed_form"] = closed
    record["estimate"] = {
        "value": est.value,
        "std_error": est.std_error,
        "replicates": est.replicates,
        "method": est.method,
        "ladder": [list(r) for r in est.ladder],
        "extrapolation_spread": est.extrapolation_spread,
    }
    if args.cross_check:
        if args.a is not None:
            raise UsageError("refbm: error: --cross-check applies to the "
                             "Pickands constant only")
        horizon = est.ladder[0][0]
        xc = consts.pickands_via_exceedance(
            args.alpha, horizon,
            mc=consts.MCBudget(replicates=max(args.replicates, 200_000),
                               seed=seed + 1, grid_points=512),
            threads=threads)
        record["exceedance_cross_check"] = {
            "horizon": horizon,
            "value": xc.value,
            "std_error": xc.std_error,
            "ladder": [list(r) for r in xc.ladder],
            "truncated_target": {
                "value": est.ladder[0][3] * horizon,
                "note": "exceedance estimator targets the truncated "
                        "constant over [0, horizon]",
            },
        }
    text = json.dumps(record, indent=2, sort_keys=True)
    print(text)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "constants.json").write_text(text + "\n")
    return EXIT_OK


def cmd_field(args) -> int:
    if args.field_command == "verify-thm21":
        return _cmd_verify_thm21(args)
    if args.field_command == "verify-piterbarg":
        return _cmd_verify_piterbarg(args)
    raise UsageError("refbm field: error: choose verify-thm21 or "
                     "verify-piterbarg")


def _cmd_verify_thm21(args) -> int:
    seed = _need_seed(args)
    threads = _threads(args)
    if args.x is not None and args.remark_b:
        raise UsageError("refbm: error: --x conflicts with --remark-b")
    x = 0.0 if args.x is None else args.x
    try:
        spec = asy.FieldSpec(beta=args.beta, b1=args.b1, b2=args.b2,
                             b3=args.b3, a1=args.a1, a2=args.a2, t0=args.t0)
    except ValueError as exc:
        raise UsageError(f"refbm: error: {exc}") from exc
    constants = None
    if consts.pickands_closed(spec.beta) is None:
        mc_c = consts.MCBudget(replicates=50_000, seed=seed + 977)
        constants = asy.ConstantEstimates(
            pickands=consts.pickands_limit_estimate(spec.beta, mc=mc_c,
                                                    threads=threads),
            piterbarg=consts.piterbarg_limit_estimate(
                spec.beta, spec.b1 / spec.a1, mc=mc_c, threads=threads))
    mc = FieldMC(replicates=args.replicates, seed=seed,
                 points_per_cell=args.points_per_cell)
    report = verify_thm21(spec, x, args.u_ladder, mc, constants=constants,
                          remark_b=args.remark_b, threads=threads)
    return _emit_field_report(args, report, "verify_thm21.json")


def _cmd_verify_piterbarg(args) -> int:
    seed = _need_seed(args)
    threads = _threads(args)
    if not args.t1 < args.t2:
        raise UsageError("refbm: error: --T1 must be below --T2")
    if args.b1 < 0 or args.b2 <= 0:
        raise UsageError("refbm: error: require --b1 >= 0 and --b2 > 0")
    mc = FieldMC(replicates=args.replicates, seed=seed,
                 points_per_cell=args.points_per_cell)
    report = verify_piterbarg_lemma(args.alpha1, args.alpha2, args.b1,
                                    args.b2, args.s_hi, args.t1, args.t2,
                                    args.u_ladder, mc, threads=threads)
    return _emit_field_report(args, report, "verify_piterbarg.json")


def _emit_field_report(args, report, filename: str) -> int:
    doc = report.to_json()
    text = json.dumps(doc, indent=2, sort_keys=True)
    print(text)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / filename).write_text(text + "\n")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("refbm: error: a subcommand is required")
        handler = {
            "formulas": cmd_formulas,
            "sample-path": cmd_sample_path,
            "passage": cmd_passage,
            "ruin-freq": cmd_ruin_freq,
            "constants": cmd_constants,
            "field": cmd_field,
        }[args.command]
        return handler(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleCampaignError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except InvalidCampaignError as exc:
        print(f"invalid campaign: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"refbm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
