"""Monte Carlo scenario engine: rejection-frequency curves over threshold grids.

Observations are drawn from the truth density; for every scoring rule and
threshold the score-difference series feeds a two-sided Diebold-Mariano test
and a one-sided Wilcoxon signed-rank test per direction.  Replications use
common random numbers across grid points and per-replication RNG streams, so
curves are bitwise reproducible for a given seed regardless of threading.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .densities import Density, make_cdfmix_G, make_cdfmix_H, make_hlt, make_hrt, parse_density
from .errors import ConfigError
from .rules import CRPS, TwCRPS
from .testing import dm_reject_2d, wilcoxon_reject_2d
from .weights import IndicatorRight, SmoothRight

__all__ = [
    "ScenarioConfig",
    "CurvePoint",
    "RejectionCurve",
    "RULE_TEMPLATES",
    "run_scenario",
    "varying_n",
    "emit_curve",
    "read_curve",
    "load_scenario_config",
    "scenario_densities",
]

#: rule templates by name; True marks threshold-parameterized (weighted) rules
RULE_TEMPLATES = {
    "logs": False,
    "crps": False,
    "hy": False,
    "twcrps": True,
    "csl": True,
    "cl": True,
    "pwl": True,
    "wh": True,
}

TESTS = ("dm", "wilcoxon")

_MAX_N = 10_000_000


@dataclass
class ScenarioConfig:
    scenario: str
    truth: Density
    forecast1: Density
    forecast2: Density
    rules: list
    r_grid: np.ndarray
    n_mode: tuple  # ("fixed", n) | ("expected_count", c)
    replications: int = 10_000
    alpha_dm: float = 0.05
    alpha_wilcoxon: float = 0.025
    seed: int = 42
    smooth_delta: float = 0.5
    name1: str = "forecast1"
    name2: str = "forecast2"

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        grid = np.asarray(self.r_grid, dtype=float)
        if grid.size == 0 or (grid.size > 1 and not np.all(np.diff(grid) > 0)):
            raise ConfigError("r_grid must be nonempty and strictly increasing")
        self.r_grid = grid
        for rule in self.rules:
            if rule not in RULE_TEMPLATES:
                raise ConfigError(f"unknown rule template {rule!r}")
        kind, value = self.n_mode
        if kind == "fixed":
            if value < 2:
                raise ConfigError("fixed sample size must be >= 2")
        elif kind == "expected_count":
            if value < 1:
                raise ConfigError("expected region count must be >= 1")
        else:
            raise ConfigError(f"unknown n_mode {kind!r}")


@dataclass
class CurvePoint:
    rule: str
    test: str
    r: float
    n: int
    favor1: float
    favor2: float


@dataclass
class RejectionCurve:
    points: list = field(default_factory=list)

    def lookup(self, rule, test, r):
        for pt in self.points:
            if pt.rule == rule and pt.test == test and math.isclose(pt.r, r):
                return pt
        raise KeyError((rule, test, r))


def varying_n(r, c):
    """n = round(c / (1 - Phi(r))), at least 2; guards against overflow."""
    tail = special.ndtr(-float(r))
    if tail <= 0.0:
        raise ConfigError(f"threshold {r} leaves no standard-normal tail mass")
    n = round(c / tail)
    if n > _MAX_N:
        raise ConfigError(f"threshold {r} requires n={n} > {_MAX_N}")
    return max(int(n), 2)


def scenario_densities(name):
    """(truth, forecast1, forecast2, label1, label2) for the named scenario."""
    truth = parse_density("normal(0,1)")
    if name == "A1":
        return truth, parse_density("normal(0,1)"), make_hlt(), "Phi", "F_hlt"
    if name == "A2":
        return truth, make_hlt(), make_hrt(), "F_hlt", "F_hrt"
    if name == "B":
        return truth, make_cdfmix_G(), make_cdfmix_H(), "G", "H"
    raise ConfigError(f"unknown scenario {name!r}")


def _grid_sizes(cfg):
    kind, value = cfg.n_mode
    if kind == "fixed":
        return [int(value)] * cfg.r_grid.size
    return [varying_n(r, value) for r in cfg.r_grid]


class _ChunkScorer:
    """Precomputes everything r-independent for one scenario."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.f1 = cfg.forecast1
        self.f2 = cfg.forecast2
        need_lik = any(t in cfg.rules for t in ("logs", "csl", "cl", "pwl"))
        need_hy = any(t in cfg.rules for t in ("hy", "wh"))
        self.need_lik = need_lik
        self.need_hy = need_hy
        if "crps" in cfg.rules:
            rule = CRPS()
            self.crps1 = rule.table(self.f1)
            self.crps2 = rule.table(self.f2)
        if "twcrps" in cfg.rules:
            self.tw_tables = {}
            for r in cfg.r_grid:
                tw = TwCRPS(IndicatorRight(float(r)))
                self.tw_tables[float(r)] = (tw.table(self.f1), tw.table(self.f2))
        if any(t in cfg.rules for t in ("csl", "cl", "pwl")):
            # keep the below-threshold mass as cdf(r) directly: 1 - mass would
            # round to zero for very negative thresholds
            self.lowmass1 = {float(r): self.f1.cdf(float(r)) for r in cfg.r_grid}
            self.lowmass2 = {float(r): self.f2.cdf(float(r)) for r in cfg.r_grid}

    def precompute(self, x):
        pre = {}
        if self.need_lik:
            pre["lp1"] = self.f1._log_pdf(x)
            pre["lp2"] = self.f2._log_pdf(x)
        if self.need_hy:
            pre["hy1"] = 2.0 * self.f1._d2ratio(x) - self.f1._dlog(x) ** 2
            pre["hy2"] = 2.0 * self.f2._d2ratio(x) - self.f2._dlog(x) ** 2
        return pre

    def diffs(self, template, r, x, pre):
        """S(forecast1) - S(forecast2) matrix for one rule template at threshold r."""
        if template == "logs":
            return pre["lp2"] - pre["lp1"]
        if template == "hy":
            return pre["hy1"] - pre["hy2"]
        if template == "crps":
            return self.crps1(x) - self.crps2(x)
        if template == "twcrps":
            t1, t2 = self.tw_tables[r]
            return t1(x) - t2(x)
        if template == "wh":
            w = SmoothRight(r, self.cfg.smooth_delta)
            wv = w._eval(x)
            wd = w._deriv(x)
            main = np.where(wv != 0.0, (pre["hy1"] - pre["hy2"]) * wv, 0.0)
            ramp = np.where(
                wd != 0.0,
                2.0 * (self.f1._dlog(x) - self.f2._dlog(x)) * wd,
                0.0,
            )
            return main + ramp
        c1, c2 = self.lowmass1[r], self.lowmass2[r]
        in_region = x >= r
        lp_diff = pre["lp2"] - pre["lp1"]
        if template == "cl":
            shift = math.log1p(-c1) - math.log1p(-c2) if c1 != c2 else 0.0
            return np.where(in_region, lp_diff + shift, 0.0)
        if template == "pwl":
            return np.where(in_region, lp_diff, 0.0) + (c2 - c1)
        if template == "csl":
            atom = math.log(c2) - math.log(c1) if c1 != c2 else 0.0
            return np.where(in_region, lp_diff, atom)
        raise ConfigError(f"unknown rule template {template!r}")


def _chunk_counts(cfg, scorer, rep_lo, rep_hi, sizes):
    n_max = max(sizes)
    reps = rep_hi - rep_lo
    x = np.empty((reps, n_max))
    for i, rep in enumerate(range(rep_lo, rep_hi)):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(rep,)))
        x[i] = cfg.truth._quantile(rng.random(n_max))
    pre = scorer.precompute(x)
    counts = {}
    cache = {}
    for template in cfg.rules:
        weighted = RULE_TEMPLATES[template]
        for r, n in zip(cfg.r_grid, sizes):
            r = float(r)
            key = (template, r if weighted else None, n)
            if key in cache:
                counts[(template, r)] = cache[key]
                continue
            d = scorer.diffs(template, r, x, pre)[:, :n]
            dm1, dm2 = dm_reject_2d(d, cfg.alpha_dm)
            wx2 = wilcoxon_reject_2d(d, cfg.alpha_wilcoxon)
            wx1 = wilcoxon_reject_2d(-d, cfg.alpha_wilcoxon)
            tallies = (int(dm1.sum()), int(dm2.sum()), int(wx1.sum()), int(wx2.sum()))
            cache[key] = tallies
            counts[(template, r)] = tallies
    return counts


def run_scenario(cfg, threads=1):
    """Run the scenario and return the rejection-frequency curve."""
    sizes = _grid_sizes(cfg)
    scorer = _ChunkScorer(cfg)
    n_max = max(sizes)
    # chunk size is independent of the thread count so results never depend
    # on parallelism; at least 16 chunks keeps worker pools busy
    chunk = max(1, min(int(4_000_000 / n_max), -(-cfg.replications // 16)))
    bounds = list(range(0, cfg.replications, chunk)) + [cfg.replications]
    jobs = list(zip(bounds[:-1], bounds[1:]))

    def worker(job):
        lo, hi = job
        return _chunk_counts(cfg, scorer, lo, hi, sizes)

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(worker, jobs))
    else:
        results = [worker(j) for j in jobs]

    curve = RejectionCurve()
    reps = cfg.replications
    for template in cfg.rules:
        for r, n in zip(cfg.r_grid, sizes):
            r = float(r)
            tot = [0, 0, 0, 0]
            for res in results:
                for i in range(4):
                    tot[i] += res[(template, r)][i]
            curve.points.append(
                CurvePoint(template, "dm", r, n, tot[0] / reps, tot[1] / reps)
            )
            curve.points.append(
                CurvePoint(template, "wilcoxon", r, n, tot[2] / reps, tot[3] / reps)
            )
    return curve


_COLUMNS = ("rule", "test", "r", "n", "favor1", "favor2")


def _fmt(v):
    return f"{v:.17g}"


def emit_curve(curve, fmt, path):
    """Write a curve as CSV or JSON with deterministic float formatting."""
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_COLUMNS)
            for pt in curve.points:
                writer.writerow(
                    [pt.rule, pt.test, _fmt(pt.r), str(pt.n), _fmt(pt.favor1), _fmt(pt.favor2)]
                )
    elif fmt == "json":
        payload = {
            "schema": "tailscore.rejection_curve.v1",
            "columns": list(_COLUMNS),
            "points": [
                {
                    "rule": pt.rule,
                    "test": pt.test,
                    "r": float(_fmt(pt.r)),
                    "n": pt.n,
                    "favor1": float(_fmt(pt.favor1)),
                    "favor2": float(_fmt(pt.favor2)),
                }
                for pt in curve.points
            ],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    else:
        raise ConfigError(f"unknown curve format {fmt!r}")


def read_curve(path, fmt=None):
    """Round-trip reader for emitted curves."""
    if fmt is None:
        fmt = "json" if str(path).endswith(".json") else "csv"
    curve = RejectionCurve()
    if fmt == "csv":
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                curve.points.append(
                    CurvePoint(
                        row["rule"], row["test"], float(row["r"]), int(row["n"]),
                        float(row["favor1"]), float(row["favor2"]),
                    )
                )
    else:
        with open(path) as fh:
            payload = json.load(fh)
        for p in payload["points"]:
            curve.points.append(
                CurvePoint(p["rule"], p["test"], p["r"], p["n"], p["favor1"], p["favor2"])
            )
    return curve


def load_scenario_config(source):
    """Build a ScenarioConfig from a JSON file path or a dict (see README)."""
    if isinstance(source, dict):
        raw = dict(source)
    else:
        with open(source) as fh:
            raw = json.load(fh)
    name = raw.get("scenario", "custom")
    if name in ("A1", "A2", "B"):
        truth, f1, f2, l1, l2 = scenario_densities(name)
    else:
        try:
            truth = parse_density(raw["truth"])
            f1 = parse_density(raw["forecast1"])
            f2 = parse_density(raw["forecast2"])
        except KeyError as exc:
            raise ConfigError(f"custom scenario config missing key {exc}") from exc
        l1 = raw.get("name1", "forecast1")
        l2 = raw.get("name2", "forecast2")
    grid_spec = raw.get("r_grid", {"start": -5.0, "stop": 3.0, "step": 0.25})
    if isinstance(grid_spec, dict):
        start, stop = float(grid_spec["start"]), float(grid_spec["stop"])
        step = float(grid_spec["step"])
        count = int(round((stop - start) / step)) + 1
        grid = start + step * np.arange(count)
    else:
        grid = np.asarray(grid_spec, dtype=float)
    n_raw = raw.get("n_mode", {"fixed": 100})
    if "fixed" in n_raw:
        n_mode = ("fixed", int(n_raw["fixed"]))
    elif "expected_count" in n_raw:
        n_mode = ("expected_count", int(n_raw["expected_count"]))
    else:
        raise ConfigError("n_mode must contain 'fixed' or 'expected_count'")
    return ScenarioConfig(
        scenario=name,
        truth=truth,
        forecast1=f1,
        forecast2=f2,
        rules=list(raw.get("rules", list(RULE_TEMPLATES))),
        r_grid=grid,
        n_mode=n_mode,
        replications=int(raw.get("replications", 10_000)),
        alpha_dm=float(raw.get("alpha_dm", 0.05)),
        alpha_wilcoxon=float(raw.get("alpha_wilcoxon", 0.025)),
        seed=int(raw.get("seed", 42)),
        smooth_delta=float(raw.get("smooth_delta", 0.5)),
        name1=l1,
        name2=l2,
    )
