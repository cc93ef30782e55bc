"""Predictive-ability tests: Diebold-Mariano, Wilcoxon signed-rank, and the
censored Neyman-Pearson test with Monte Carlo critical values."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .densities import Density
from .errors import ConfigError, DomainError
from .rules import ScoringRule, TwCRPS
from .weights import WeightFunction

__all__ = [
    "TestResult",
    "NpTestSpec",
    "PowerEstimate",
    "dm_test",
    "wilcoxon_test",
    "censored_lr_statistic",
    "np_critical_value",
    "np_test",
    "score_mc_critical_value",
    "power_estimate",
    "ump_bruteforce_check",
    "ScoreMC",
    "DMOnRule",
    "WilcoxonOnRule",
]

_ATOM_TOL = 1e-12


@dataclass
class TestResult:
    statistic: float
    p_value: float | None
    reject_prob: float
    direction: str  # favor_first | favor_second | none
    n_effective: int
    degenerate: bool = False

    @property
    def reject(self):
        return self.reject_prob > 0.0


def _degenerate(n):
    return TestResult(0.0, 1.0, 0.0, "none", n, degenerate=True)


def dm_test(diffs, sided="two", alpha=0.05, k=1):
    """Diebold-Mariano test on a score-difference series.

    For one-step-ahead forecasts (k=1) the long-run variance reduces to the
    plain sample variance; for k > 1 a Bartlett window over lags < k is used.
    Critical values are standard normal.
    """
    d = np.asarray(diffs, dtype=float)
    if d.size < 2:
        raise DomainError("dm_test needs at least two score differences")
    if not np.all(np.isfinite(d)):
        raise DomainError("dm_test requires finite score differences")
    n = d.size
    dbar = d.mean()
    c = d - dbar
    var = np.mean(c * c)
    for j in range(1, k):
        gamma = np.mean(c[j:] * c[:-j])
        var += 2.0 * (1.0 - j / k) * gamma
    if var <= 0.0:
        return _degenerate(n)
    t = math.sqrt(n) * dbar / math.sqrt(var)
    if sided == "two":
        p = 2.0 * special.ndtr(-abs(t))
        crit = special.ndtri(1.0 - alpha / 2.0)
        reject = abs(t) > crit
    elif sided == "one":
        p = float(special.ndtr(-t))
        reject = t > special.ndtri(1.0 - alpha)
    else:
        raise DomainError(f"unknown sidedness {sided!r}")
    direction = "none" if t == 0.0 else ("favor_second" if t > 0.0 else "favor_first")
    return TestResult(t, float(p), 1.0 if reject else 0.0, direction, n)


def _exact_wilcoxon_sf(double_ranks, w2_obs):
    """P(W+ >= w_obs) by dynamic programming over doubled (tie-averaged) ranks."""
    total = int(round(sum(double_ranks)))
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in double_ranks:
        r = int(round(r))
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: counts.size - r]
        counts = counts + shifted
    counts /= counts.sum()
    k = int(math.ceil(w2_obs - 1e-9))
    return float(counts[max(k, 0):].sum())


def wilcoxon_test(diffs, alpha=0.025):
    """One-sided Wilcoxon signed-rank test for positive location.

    Zeros are discarded; ties get average ranks.  Exact distribution for up
    to 25 nonzero differences, tie-corrected normal approximation beyond.
    """
    d = np.asarray(diffs, dtype=float)
    d = d[d != 0.0]
    m = d.size
    if m == 0:
        return _degenerate(0)
    ranks = stats.rankdata(np.abs(d))
    w_plus = float(ranks[d > 0.0].sum())
    if m <= 25:
        p = _exact_wilcoxon_sf(2.0 * ranks, 2.0 * w_plus)
    else:
        mu = m * (m + 1) / 4.0
        var = m * (m + 1) * (2 * m + 1) / 24.0
        _, tie_counts = np.unique(ranks, return_counts=True)
        var -= np.sum(tie_counts**3 - tie_counts) / 48.0
        if var <= 0.0:
            return _degenerate(m)
        p = float(special.ndtr(-(w_plus - mu) / math.sqrt(var)))
    reject = p <= alpha
    direction = "favor_second" if reject else "none"
    return TestResult(w_plus, p, 1.0 if reject else 0.0, direction, m)


# ---------------------------------------------------------------------------
# vectorized per-replication tests (simulation fast paths)


def dm_reject_2d(diffs, alpha=0.05):
    """Two-sided DM over rows; returns (reject_favor_first, reject_favor_second).

    Zero-variance rows are degenerate and never reject.
    """
    d = np.asarray(diffs, dtype=float)
    n = d.shape[1]
    dbar = d.mean(axis=1)
    var = np.mean((d - dbar[:, None]) ** 2, axis=1)
    crit = special.ndtri(1.0 - alpha / 2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(var > 0.0, math.sqrt(n) * dbar / np.sqrt(var), 0.0)
    reject = np.abs(t) > crit
    return reject & (t < 0.0), reject & (t > 0.0)


_EXACT_SF_TABLES: dict[int, np.ndarray] = {}


def _exact_sf_table(m):
    """Survival function P(W+ >= k), k = 0..m(m+1)/2, untied ranks 1..m."""
    tab = _EXACT_SF_TABLES.get(m)
    if tab is None:
        total = m * (m + 1) // 2
        counts = np.zeros(total + 1)
        counts[0] = 1.0
        for r in range(1, m + 1):
            shifted = np.zeros_like(counts)
            shifted[r:] = counts[: counts.size - r]
            counts = counts + shifted
        pmf = counts / counts.sum()
        tab = np.cumsum(pmf[::-1])[::-1]
        _EXACT_SF_TABLES[m] = tab
    return tab


def wilcoxon_reject_2d(diffs, alpha=0.025):
    """One-sided (positive location) Wilcoxon over rows of a diff matrix.

    Zeros are dropped per row; exact null distribution for <= 25 nonzero
    entries, normal approximation beyond.  Continuous score differences make
    nonzero ties a measure-zero event, so no tie correction is applied here.
    """
    d = np.asarray(diffs, dtype=float)
    nonzero = d != 0.0
    m = nonzero.sum(axis=1)
    absd = np.where(nonzero, np.abs(d), np.inf)
    ranks = stats.rankdata(absd, axis=1)
    w_plus = np.where(d > 0.0, ranks, 0.0).sum(axis=1)

    reject = np.zeros(d.shape[0], dtype=bool)
    big = m > 25
    if np.any(big):
        mb = m[big].astype(float)
        mu = mb * (mb + 1) / 4.0
        var = mb * (mb + 1) * (2 * mb + 1) / 24.0
        z = (w_plus[big] - mu) / np.sqrt(var)
        reject[big] = special.ndtr(-z) <= alpha
    for mm in np.unique(m[~big]):
        if mm == 0:
            continue
        tab = _exact_sf_table(int(mm))
        rows = (m == mm) & ~big
        k = np.ceil(w_plus[rows] - 1e-9).astype(int)
        reject[rows] = tab[np.clip(k, 0, tab.size - 1)] <= alpha
    return reject


# ---------------------------------------------------------------------------
# censored Neyman-Pearson test


@dataclass
class NpTestSpec:
    p0: Density
    p1: Density
    region: WeightFunction
    n: int
    alpha: float
    mc_reps: int = 100_000
    seed: int = 42
    m0: float = field(init=False)
    m1: float = field(init=False)

    def __post_init__(self):
        if not self.region.is_indicator:
            raise ConfigError("NP test region must be an indicator-kind weight")
        if self.n < 1:
            raise ConfigError("sample size must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        self.m0 = self.region.mass(self.p0)
        self.m1 = self.region.mass(self.p1)
        for name, m in (("p0", self.m0), ("p1", self.m1)):
            if not 1e-300 < m < 1.0 - 1e-15:
                raise ConfigError(f"region probability under {name} must lie strictly in (0, 1)")


def censored_lr_statistic(spec, x):
    """Censored log-likelihood ratio summed over the trailing axis.

    T = sum [1_A log(p1/p0) + 1_{A^c} log(P1(A^c)/P0(A^c))]; equals the
    censored-likelihood score-difference statistic.
    """
    xa = np.asarray(x, dtype=float)
    in_region = spec.region._eval(xa) > 0.0
    atom = math.log1p(-spec.m1) - math.log1p(-spec.m0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = spec.p1._log_pdf(xa) - spec.p0._log_pdf(xa)
    terms = np.where(in_region, ratio, atom)
    return terms.sum(axis=-1)


def np_critical_value(spec):
    """Monte Carlo (c_alpha, gamma) for the randomized censored NP test."""
    if spec.mc_reps < 1000:
        raise ConfigError("mc_reps below 1000 makes the critical value too noisy")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=spec.seed, spawn_key=(0,)))
    x = spec.p0._quantile(rng.random((spec.mc_reps, spec.n)))
    t = censored_lr_statistic(spec, x)
    return _mc_critical_value(t, spec.alpha)


def _mc_critical_value(t, alpha):
    reps = t.size
    order = np.sort(t)
    k = int(math.ceil((1.0 - alpha) * reps))
    c = order[k - 1]
    n_le = int(np.count_nonzero(t <= c + _ATOM_TOL))
    n_lt = int(np.count_nonzero(t < c - _ATOM_TOL))
    atom = n_le - n_lt
    gamma = (n_le - (1.0 - alpha) * reps) / atom if atom > 0 else 0.0
    return float(c), float(min(max(gamma, 0.0), 1.0))


def _reject_prob(t, c, gamma):
    t = np.asarray(t, dtype=float)
    return np.where(t > c + _ATOM_TOL, 1.0, np.where(t >= c - _ATOM_TOL, gamma, 0.0))


def np_test(sample, spec, c_alpha, gamma):
    """Apply the randomized censored NP test to one sample of size spec.n."""
    x = np.asarray(sample, dtype=float)
    if x.size != spec.n:
        raise DomainError(f"sample length {x.size} != spec.n = {spec.n}")
    t = float(censored_lr_statistic(spec, x))
    rp = float(_reject_prob(t, c_alpha, gamma))
    direction = "favor_second" if rp > 0.0 else "none"
    return TestResult(t, None, rp, direction, spec.n)


# ---------------------------------------------------------------------------
# power estimation


@dataclass(frozen=True)
class ScoreMC:
    """Randomized test of the score-difference statistic with MC critical value."""

    rule: ScoringRule

    def label(self):
        return f"score_mc[{self.rule.name}]"


@dataclass(frozen=True)
class DMOnRule:
    rule: ScoringRule
    sided: str = "two"

    def label(self):
        return f"dm[{self.rule.name}]"


@dataclass(frozen=True)
class WilcoxonOnRule:
    rule: ScoringRule

    def label(self):
        return f"wilcoxon[{self.rule.name}]"


@dataclass
class PowerEstimate:
    power: float
    se: float
    reps: int
    invalid_reps: int = 0


def _batch_diffs(rule, p0, p1, x):
    """Score-difference matrix S(p0) - S(p1), using spline tables for twCRPS."""
    if isinstance(rule, TwCRPS):
        return rule.table(p0)(x) - rule.table(p1)(x)
    return rule._score(p0, x) - rule._score(p1, x)


def score_mc_critical_value(spec, rule):
    """MC critical value for the Eq.-(12)-style test built from `rule`."""
    if spec.mc_reps < 1000:
        raise ConfigError("mc_reps below 1000 makes the critical value too noisy")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=spec.seed, spawn_key=(0,)))
    x = spec.p0._quantile(rng.random((spec.mc_reps, spec.n)))
    t = _batch_diffs(rule, spec.p0, spec.p1, x).sum(axis=-1)
    return _mc_critical_value(t, spec.alpha)


def power_estimate(test_kind, truth, spec, reps=10_000, seed=None):
    """Mean rejection probability over `reps` samples of size spec.n from `truth`."""
    if reps < 1000:
        raise ConfigError("power estimation needs at least 1000 replications")
    seed = spec.seed if seed is None else seed
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1,)))
    x = truth._quantile(rng.random((reps, spec.n)))

    if test_kind == "np":
        c, gamma = np_critical_value(spec)
        rp = _reject_prob(censored_lr_statistic(spec, x), c, gamma)
        return PowerEstimate(float(rp.mean()), float(rp.std() / math.sqrt(reps)), reps)

    if isinstance(test_kind, ScoreMC):
        c, gamma = score_mc_critical_value(spec, test_kind.rule)
        t = _batch_diffs(test_kind.rule, spec.p0, spec.p1, x).sum(axis=-1)
        rp = _reject_prob(t, c, gamma)
        return PowerEstimate(float(rp.mean()), float(rp.std() / math.sqrt(reps)), reps)

    if isinstance(test_kind, (DMOnRule, WilcoxonOnRule)):
        d = _batch_diffs(test_kind.rule, spec.p0, spec.p1, x)
        valid = np.all(np.isfinite(d), axis=1)
        d = d[valid]
        invalid = int(reps - d.shape[0])
        if isinstance(test_kind, DMOnRule):
            _, favor_second = dm_reject_2d(d, alpha=spec.alpha)
            hits = favor_second.astype(float)
        else:
            hits = wilcoxon_reject_2d(d, alpha=spec.alpha).astype(float)
        k = hits.size
        return PowerEstimate(float(hits.mean()), float(hits.std() / math.sqrt(k)), k, invalid)

    raise ConfigError(f"unknown test kind {test_kind!r}")


# ---------------------------------------------------------------------------
# brute-force UMP verification at n = 1


def ump_bruteforce_check(spec, grid_size=200, n_tests=50, n_alternatives=20,
                         seed=0, slack=1e-9):
    """Check the censoring construction against random level-alpha tests.

    The sample space is discretized into `grid_size` cells; for each random
    gridded level-alpha test phi, the censored version (phi on A, constant
    beta off-region) must keep level alpha and weakly dominate phi's power
    against every gridded alternative tried.  Returns True iff all pass.
    """
    if spec.n != 1:
        raise ConfigError("brute-force UMP check is defined for n = 1 only")
    p0, p1, region, alpha = spec.p0, spec.p1, spec.region, spec.alpha
    lo = min(p0.quantile(1e-6), p1.quantile(1e-6))
    hi = max(p0.quantile(1.0 - 1e-6), p1.quantile(1.0 - 1e-6))
    edges = np.linspace(lo, hi, grid_size + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    prob0 = np.diff(p0._cdf(edges))
    prob1 = np.diff(p1._cdf(edges))
    # fold the outer tails into the edge cells so the grid is a probability space
    prob0[0] += p0.cdf(lo)
    prob0[-1] += 1.0 - p0.cdf(hi)
    prob1[0] += p1.cdf(lo)
    prob1[-1] += 1.0 - p1.cdf(hi)
    in_a = region._eval(centers) > 0.0
    p0_ac = prob0[~in_a].sum()
    p1_ac = prob1[~in_a].sum()
    if p0_ac <= 0.0 or p1_ac <= 0.0 or in_a.sum() == 0:
        raise ConfigError("grid does not resolve both the region and its complement")

    rng = np.random.default_rng(seed)
    for _ in range(n_tests):
        phi = rng.random(grid_size)
        level = phi[in_a] @ prob0[in_a] + p0_ac * phi[~in_a].max()
        if level > alpha:
            phi = phi * (alpha / level)
        size_on_a = phi[in_a] @ prob0[in_a]
        beta = min((alpha - size_on_a) / p0_ac, 1.0)
        phi_cen = phi.copy()
        phi_cen[~in_a] = beta

        cen_level = size_on_a + beta * p0_ac
        if cen_level > alpha + slack:
            return False

        power_a = phi[in_a] @ prob1[in_a]
        cen_power = power_a + beta * p1_ac
        # worst alternative concentrates all off-region mass where phi peaks
        worst = power_a + phi[~in_a].max() * p1_ac
        if cen_power < worst - slack:
            return False
        for _ in range(n_alternatives):
            wts = rng.random((~in_a).sum())
            qc = wts / wts.sum() * p1_ac
            if cen_power < power_a + phi[~in_a] @ qc - slack:
                return False
    return True
