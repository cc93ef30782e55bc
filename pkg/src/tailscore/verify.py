"""Self-verification suites: propriety matrix, score identities, test
optimality, and the n=1 most-powerful-test check.

Each suite returns a list of CheckResult records; ``format_matrix`` renders
the propriety results as a rule-by-property grid for the command line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .densities import (
    HLT_SCALE,
    Normal,
    ScaledT,
    SkewT,
    make_hlt,
    make_hrt,
    parse_density,
    tail_matched,
    tail_scaled,
)
from .rules import (
    CRPS,
    BarS,
    CensoredLikelihood,
    ConditionalLikelihood,
    HyvarinenScore,
    LogScore,
    PenalizedWeightedLikelihood,
    TwCRPS,
    WeightedHyvarinen,
    binary_augmented,
    divergence,
)
from .testing import NpTestSpec, ScoreMC, power_estimate, ump_bruteforce_check
from .weights import Constant, IndicatorRight, SmoothRight

__all__ = [
    "CheckResult",
    "catalog",
    "suite_propriety",
    "suite_identities",
    "suite_optimality",
    "suite_ump",
    "run_suites",
    "format_matrix",
    "SUITES",
]


@dataclass
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: str = ""


def catalog():
    """Six analytically distinct densities used by the verification grids."""
    return [
        Normal(0.0, 1.0),
        Normal(0.3, 1.0),
        Normal(0.0, 1.3),
        ScaledT(4.0, HLT_SCALE, 0.0),
        make_hlt(),
        SkewT(8.5, 0.94, 0.0, 1.0),
    ]


def _rules_for_matrix(r=0.5, delta=0.5):
    """(name, rule, expected flags) rows mirroring the rule-property summary.

    Flags: proper, strictly proper (unweighted only), localizing, strictly
    locally proper, proportionally locally proper; None = not applicable.
    """
    right = IndicatorRight(r)
    smooth = SmoothRight(r, delta)
    return [
        ("logs", LogScore(), dict(proper=True, strict=True, loc=False, slp=None, plp=None)),
        ("crps", CRPS(), dict(proper=True, strict=True, loc=False, slp=None, plp=None)),
        ("hy", HyvarinenScore(), dict(proper=True, strict=True, loc=False, slp=None, plp=None)),
        ("twcrps", TwCRPS(right), dict(proper=True, strict=None, loc=True, slp=True, plp=False)),
        ("csl", CensoredLikelihood(right), dict(proper=True, strict=None, loc=True, slp=True, plp=False)),
        ("cl", ConditionalLikelihood(right), dict(proper=True, strict=None, loc=True, slp=False, plp=True)),
        ("pwl", PenalizedWeightedLikelihood(right), dict(proper=True, strict=None, loc=True, slp=True, plp=False)),
        ("wh", WeightedHyvarinen(smooth), dict(proper=True, strict=None, loc=True, slp=False, plp=True)),
    ]


def _region_getter(name, r=0.5, delta=0.5):
    # region lower edge where the weight becomes active
    return r - delta if name == "wh" else r


def suite_propriety(quick=False):
    """Empirical rule-property matrix over the catalog grid.

    For every rule: nonnegative divergence on all ordered catalog pairs
    (propriety); strict positivity for strictly (locally) proper rules on
    pairs differing inside the region; zero divergence on proportional pairs
    for the proportionally locally proper rules; invariance of scores under
    off-region modification for localizing rules.
    """
    results = []
    cat = catalog()
    if quick:
        cat = cat[:4]
    r = 0.5
    base = Normal(0.0, 1.0)
    # pair agreeing with base on [0.5-ish, inf) but reshaped below
    matched = tail_matched(base, -0.25, ScaledT(4.0, HLT_SCALE, 0.0))
    scaled = tail_scaled(base, -0.25, 1.35, ScaledT(4.0, HLT_SCALE, 0.0))
    xs = np.linspace(-3.0, 3.0, 25)
    for name, rule, flags in _rules_for_matrix(r):
        min_div = math.inf
        min_off = math.inf
        for q in cat:
            for p in cat:
                d = divergence(rule, p, q)
                min_div = min(min_div, d)
                if p is not q:
                    min_off = min(min_off, d)
        ok = min_div >= -1e-8
        results.append(CheckResult("propriety", f"{name}:proper", ok, f"min divergence {min_div:.3e}"))
        if flags["strict"] is not None:
            ok = min_off > 1e-4
            results.append(
                CheckResult("propriety", f"{name}:strictly-proper", ok, f"min off-diagonal {min_off:.3e}")
            )
        if flags["loc"]:
            # scores must not change when the forecast is modified off-region
            gap = max(
                abs(rule.score(base, float(x)) - rule.score(matched, float(x))) for x in xs
            )
            results.append(
                CheckResult("propriety", f"{name}:localizing", gap < 1e-8, f"max score gap {gap:.3e}")
            )
        if flags["slp"]:
            # pairs differing inside the region keep positive divergence
            worst = min(
                divergence(rule, p, q)
                for p, q in [(cat[0], cat[1]), (cat[0], cat[2]), (cat[1], cat[3])]
            )
            results.append(
                CheckResult(
                    "propriety", f"{name}:strictly-locally-proper", worst > 1e-4,
                    f"min in-region divergence {worst:.3e}",
                )
            )
        if flags["slp"] is False:
            d = abs(divergence(rule, scaled, base))
            results.append(
                CheckResult(
                    "propriety", f"{name}:not-strictly-locally-proper", d < 1e-8,
                    f"proportional-pair divergence {d:.3e}",
                )
            )
        if flags["plp"]:
            d = abs(divergence(rule, scaled, base))
            results.append(
                CheckResult(
                    "propriety", f"{name}:proportionally-locally-proper", d < 1e-8,
                    f"proportional-pair divergence {d:.3e}",
                )
            )
    return results


def suite_identities(seed=42, tuples=200):
    """Randomized pointwise score identities.

    The censored rule decomposes as the penalized rule plus the binary
    augmentation with the complementary weight; the penalized rule decomposes
    as the conditional rule plus the binary augmentation with the weight
    itself.  Checked over random (density, x, threshold) draws.
    """
    rng = np.random.default_rng(seed)
    dens = [
        Normal(0.0, 1.0),
        Normal(0.4, 1.2),
        ScaledT(5.0, 0.9, 0.1),
        make_hlt(),
        make_hrt(),
        SkewT(8.5, 0.94, 0.0, 1.0),
    ]
    worst1 = worst2 = 0.0
    for _ in range(tuples):
        p = dens[rng.integers(len(dens))]
        x = float(rng.normal(0.0, 2.0))
        r = float(rng.uniform(-2.5, 1.5))
        w = IndicatorRight(r)
        csl = CensoredLikelihood(w).score(p, x)
        pwl = PenalizedWeightedLikelihood(w).score(p, x)
        cl = ConditionalLikelihood(w).score(p, x)
        aug_comp = binary_augmented(BarS(), w.complement()).score(p, x)
        aug_w = binary_augmented(BarS(), w).score(p, x)
        worst1 = max(worst1, abs(csl - pwl - aug_comp))
        worst2 = max(worst2, abs(pwl - cl - aug_w))
    results = [
        CheckResult(
            "identities", "censored = penalized + binary(complement)",
            worst1 < 1e-10, f"max abs error {worst1:.3e} over {tuples} tuples",
        ),
        CheckResult(
            "identities", "penalized = conditional + binary(weight)",
            worst2 < 1e-10, f"max abs error {worst2:.3e} over {tuples} tuples",
        ),
    ]
    # unweighted Hyvarinen equals the weighted form under a constant weight
    one = Constant(1)
    hy, wh = HyvarinenScore(), WeightedHyvarinen(one)
    xs = np.linspace(-3.0, 3.0, 41)
    gap = max(abs(hy.score(dens[0], float(x)) - wh.score(dens[0], float(x))) for x in xs)
    results.append(
        CheckResult("identities", "hy = wh(one)", gap < 1e-12, f"max abs gap {gap:.3e}")
    )
    return results


def suite_optimality(seed=42, reps=2000, mc_reps=20_000):
    """The censored-likelihood test is the most powerful of the score-based
    tests: its Monte Carlo power must not fall more than two pooled standard
    errors below any competitor at matched level."""
    configs = [
        (Normal(0.0, 1.0), Normal(0.6, 1.0), 0.0, 1, 0.05),
        (Normal(0.0, 1.0), Normal(0.5, 1.0), 0.5, 8, 0.05),
        (Normal(0.0, 1.0), Normal(0.0, 1.4), 1.0, 15, 0.05),
    ]
    results = []
    for p0, p1, r, n, alpha in configs:
        spec = NpTestSpec(p0=p0, p1=p1, region=IndicatorRight(r), n=n, alpha=alpha,
                          mc_reps=mc_reps, seed=seed)
        w = IndicatorRight(r)
        kinds = {
            "csl": ScoreMC(CensoredLikelihood(w)),
            "cl": ScoreMC(ConditionalLikelihood(w)),
            "pwl": ScoreMC(PenalizedWeightedLikelihood(w)),
            "twcrps": ScoreMC(TwCRPS(w)),
        }
        powers = {
            k: power_estimate(kind, p1, spec, reps=reps, seed=seed + 1)
            for k, kind in kinds.items()
        }
        ref = powers["csl"]
        for k in ("cl", "pwl", "twcrps"):
            other = powers[k]
            pooled_se = math.hypot(ref.se, other.se)
            ok = ref.power >= other.power - 2.0 * pooled_se
            results.append(
                CheckResult(
                    "optimality",
                    f"censored vs {k} (r={r:g}, n={n})",
                    ok,
                    f"power {ref.power:.4f} vs {other.power:.4f} (2*SE {2*pooled_se:.4f})",
                )
            )
    return results


def suite_ump(seed=0, grid_size=200, n_tests=50):
    """Brute-force most-powerful check at n=1 against random level-alpha
    competitors on a discretized observation space."""
    spec = NpTestSpec(
        p0=Normal(0.0, 1.0), p1=Normal(1.0, 1.0), region=IndicatorRight(0.0),
        n=1, alpha=0.05, mc_reps=50_000, seed=42,
    )
    ok = ump_bruteforce_check(spec, grid_size=grid_size, n_tests=n_tests, seed=seed)
    detail = f"{n_tests} random tests on a {grid_size}-cell grid"
    return [CheckResult("ump", "n=1 dominance over random level-alpha tests", ok, detail)]


SUITES = {
    "propriety": suite_propriety,
    "identities": suite_identities,
    "optimality": suite_optimality,
    "ump": suite_ump,
}


def run_suites(names=None):
    names = list(SUITES) if names is None else list(names)
    results = []
    for name in names:
        results.extend(SUITES[name]())
    return results


_MATRIX_COLS = [
    ("proper", "proper"),
    ("strictly-proper", "strictly proper"),
    ("localizing", "localizing"),
    ("strictly-locally-proper", "strictly locally proper"),
    ("proportionally-locally-proper", "proportionally locally proper"),
]


def format_matrix(results):
    """Render propriety-suite results as a rule-by-property grid."""
    by_key = {}
    for res in results:
        if res.suite != "propriety":
            continue
        rule, prop = res.name.split(":", 1)
        if prop == "not-strictly-locally-proper":
            prop = "strictly-locally-proper"
            by_key[(rule, prop)] = "no*" if res.passed else "FAIL"
            continue
        by_key[(rule, prop)] = "yes" if res.passed else "FAIL"
    rules = []
    for res in results:
        if res.suite == "propriety":
            rule = res.name.split(":", 1)[0]
            if rule not in rules:
                rules.append(rule)
    header = ["rule"] + [label for _, label in _MATRIX_COLS]
    widths = [max(8, len(h)) for h in header]
    lines = []
    rows = [header]
    for rule in rules:
        row = [rule]
        for key, _ in _MATRIX_COLS:
            row.append(by_key.get((rule, key), "-"))
        rows.append(row)
    for row in rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
    lines.append("(* verified zero divergence on proportional pairs; 'no' for that property)")
    return "\n".join(lines)
