"""Command-line interface.

Subcommands: score (one score value), compare (two forecasts on an
observation file), simulate (rejection-frequency curves), nptest (censored
likelihood-ratio test calibration), verify (self-check suites), evaluate
(forecast-stream t-statistic grid).

Exit codes: 0 success, 2 usage or grammar error, 3 domain or degenerate
input, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from .densities import parse_density
from .errors import (
    ConfigError,
    DegenerateMassError,
    DomainError,
    GrammarError,
    IntegrationError,
)
from .rules import parse_rule, score_diff_series
from .scenarios import emit_curve, load_scenario_config, run_scenario
from .streams import emit_table, evaluate_stream, parse_stream
from .testing import NpTestSpec, dm_test, np_critical_value, power_estimate, wilcoxon_test
from .verify import SUITES, format_matrix, run_suites
from .weights import parse_weight

GRAMMAR_EPILOG = """\
density grammar:
  normal(mu,sigma)        normal distribution
  scaledt(nu,scale,loc)   scaled and shifted Student t
  skewt(nu,gamma,loc,scale)  skewed Student t
  hlt                     heavy-left-tail composite (t4 left of 0, normal right)
  hrt                     heavy-right-tail composite (mirror of hlt)
  G, H                    cdf-blended normal/t4 composites

weight grammar:
  right(r)  left(r)  interval(a,b)  smoothright(r,delta)  one

rule grammar:
  logs  crps  hy  qcrps(alpha)
  twcrps(W)  csl(W)  cl(W)  pwl(W)  wh(W)   with W a weight expression,
  or pass the bare rule name plus --weight W.
"""


def _compose_rule(rule_spec, weight_spec):
    if weight_spec is None:
        return parse_rule(rule_spec)
    if "(" in rule_spec:
        raise GrammarError("give the weight either inline or via --weight, not both")
    return parse_rule(f"{rule_spec}({weight_spec})")


def _read_observations(path):
    values = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip().split(",")[0]
            if not text or (lineno == 1 and text.lower() == "obs"):
                continue
            try:
                values.append(float(text))
            except ValueError:
                raise ConfigError(f"{path} line {lineno}: non-numeric value {text!r}") from None
    if len(values) < 2:
        raise ConfigError(f"{path}: need at least 2 observations")
    return np.asarray(values)


def _cmd_score(args):
    rule = _compose_rule(args.rule, args.weight)
    p = parse_density(args.density)
    value = rule.score(p, args.x)
    print(f"{value:.15g}")
    return 0


def _cmd_compare(args):
    rule = _compose_rule(args.rule, args.weight)
    p1 = parse_density(args.density1)
    p2 = parse_density(args.density2)
    x = _read_observations(args.obs)
    diffs = score_diff_series(rule, p1, p2, x)
    dm = dm_test(diffs, sided="two", alpha=args.alpha_dm)
    print(f"rule: {rule.name}")
    print(f"n: {x.size}")
    print(f"mean score difference (density1 - density2): {float(np.mean(diffs)):.15g}")
    if dm.degenerate:
        print("dm: degenerate (zero-variance difference series); no rejection")
    else:
        print(f"dm statistic: {dm.statistic:.15g}")
        print(f"dm p-value: {dm.p_value:.15g}")
        print(f"dm direction: {dm.direction}")
    for label, series in (("density2", diffs), ("density1", -diffs)):
        wx = wilcoxon_test(series, alpha=args.alpha_wilcoxon)
        verdict = "reject" if wx.reject else "no rejection"
        print(f"wilcoxon favor-{label}: p-value {wx.p_value:.15g} ({verdict})")
    return 0


def _cmd_simulate(args):
    cfg = load_scenario_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    start = time.perf_counter()
    curve = run_scenario(cfg, threads=args.threads)
    elapsed = time.perf_counter() - start
    emit_curve(curve, args.format, args.out)
    print(
        f"scenario {cfg.scenario}: {cfg.replications} replications, "
        f"{cfg.r_grid.size} thresholds, seed {cfg.seed}, {elapsed:.1f}s -> {args.out}"
    )
    return 0


def _cmd_nptest(args):
    spec = NpTestSpec(
        p0=parse_density(args.p0),
        p1=parse_density(args.p1),
        region=parse_weight(args.region),
        n=args.n,
        alpha=args.alpha,
        mc_reps=args.mc,
        seed=args.seed,
    )
    c, gamma = np_critical_value(spec)
    print(f"critical value: {c:.15g}")
    print(f"randomization gamma: {gamma:.15g}")
    if args.power:
        est = power_estimate("np", spec.p1, spec, reps=args.power_reps, seed=args.seed)
        print(f"power under p1: {est.power:.6g} (se {est.se:.2g}, {est.reps} replications)")
    return 0


def _cmd_verify(args):
    names = args.suite if args.suite else list(SUITES)
    results = run_suites(names)
    failed = 0
    for res in results:
        status = "pass" if res.passed else "FAIL"
        failed += not res.passed
        print(f"[{status}] {res.suite}: {res.name} ({res.detail})")
    if "propriety" in names:
        print()
        print(format_matrix(results))
    print()
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 1


def _cmd_evaluate(args):
    stream = parse_stream(args.stream)
    rules = [tok.strip() for tok in args.rules.split(",") if tok.strip()]
    weights = [tok.strip() for tok in args.weights.split(",") if tok.strip()]
    table = evaluate_stream(stream, rules, weights, alpha=args.alpha)
    if args.out:
        emit_table(table, args.format, args.out)
        print(f"wrote {len(table.cells)} cells -> {args.out}")
    else:
        emit_table(table, args.format, sys.stdout)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tailscore",
        description="Weighted scoring rules and equal-predictive-performance tests.",
        epilog=GRAMMAR_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score one forecast density at one observation")
    p.add_argument("--rule", required=True, help="rule name or full rule expression")
    p.add_argument("--weight", help="weight expression for bare weighted rule names")
    p.add_argument("--density", required=True, help="forecast density expression")
    p.add_argument("--x", required=True, type=float, help="realized observation")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("compare", help="test two forecast densities on an observation file")
    p.add_argument("--rule", required=True)
    p.add_argument("--weight")
    p.add_argument("--density1", required=True)
    p.add_argument("--density2", required=True)
    p.add_argument("--obs", required=True, help="file with one observation per line")
    p.add_argument("--alpha-dm", type=float, default=0.05)
    p.add_argument("--alpha-wilcoxon", type=float, default=0.025)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("simulate", help="run a scenario and write the rejection curve")
    p.add_argument("--config", required=True, help="JSON scenario config file")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, help="override the config seed")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("nptest", help="calibrate the censored likelihood-ratio test")
    p.add_argument("--p0", required=True, help="null density expression")
    p.add_argument("--p1", required=True, help="alternative density expression")
    p.add_argument("--region", required=True, help="indicator weight expression")
    p.add_argument("--n", required=True, type=int)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--mc", type=int, default=100_000, help="calibration sample count")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--power", action="store_true", help="also estimate power under p1")
    p.add_argument("--power-reps", type=int, default=10_000)
    p.set_defaults(func=_cmd_nptest)

    p = sub.add_parser("verify", help="run the self-verification suites")
    p.add_argument(
        "--suite", action="append", choices=tuple(SUITES),
        help="restrict to one suite (repeatable); default: all",
    )
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("evaluate", help="evaluate a forecast-stream CSV")
    p.add_argument("--stream", required=True)
    p.add_argument("--rules", required=True, help="comma-separated rule names")
    p.add_argument("--weights", required=True, help="comma-separated weight expressions")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out", help="output path; omitted: print CSV to stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=_cmd_evaluate)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (GrammarError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, DegenerateMassError, IntegrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
