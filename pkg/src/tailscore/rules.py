"""Scoring rules: unweighted, weighted, and the two generic constructions.

Conventions: scores are losses (lower is better), the expected score is
S(p, q; w) = int S(p, x; w) q(x) dx, and 0*log(0) = 0*log(inf) = 0 wherever
the weight vanishes.  Scores are extended reals: +inf arises from log of a
zero density or mass, never NaN.
"""

from __future__ import annotations

import math
import re

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from .densities import Density, _scalarize
from .errors import ConfigError, DomainError, GrammarError, IntegrationError
from .weights import (
    Constant,
    IndicatorInterval,
    IndicatorLeft,
    IndicatorRight,
    SmoothRight,
    WeightFunction,
    parse_weight,
)

__all__ = [
    "ScoringRule",
    "LogScore",
    "HyvarinenScore",
    "ConditionalLikelihood",
    "CensoredLikelihood",
    "PenalizedWeightedLikelihood",
    "WeightedHyvarinen",
    "TwCRPS",
    "CRPS",
    "QuantileCRPS",
    "BinaryScore",
    "BarS",
    "LogLoss",
    "BinaryAugmented",
    "SumRule",
    "conditional_rule",
    "binary_augmented",
    "expected_score",
    "divergence",
    "score_series",
    "score_diff_series",
    "parse_rule",
]


def _weight_support(w):
    """(lo, hi) outside of which w vanishes."""
    if isinstance(w, IndicatorRight):
        return w.r, math.inf
    if isinstance(w, IndicatorLeft):
        return -math.inf, w.r
    if isinstance(w, IndicatorInterval):
        return w.a, w.b
    if isinstance(w, SmoothRight):
        return w.r - w.delta, math.inf
    return -math.inf, math.inf


class ScoringRule:
    name = "?"
    weight: WeightFunction | None = None

    def score(self, p: Density, x):
        """Pointwise score; scalar in, scalar out (arrays broadcast)."""
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        out = self._score(p, xa)
        if np.any(np.isnan(out)):
            raise DomainError(f"{self.name} produced NaN (invalid rule/density combination)")
        return _scalarize(x, out.reshape(np.shape(x)))

    def _score(self, p, x):
        raise NotImplementedError

    def __repr__(self):
        return self.name


def _masked_nlogp(p, x, wv):
    """w * (-log p) with the 0*log convention applied where w == 0."""
    lp = p._log_pdf(x)
    return np.where(wv > 0.0, wv * (-lp), 0.0)


class LogScore(ScoringRule):
    name = "logs"

    def _score(self, p, x):
        return -p._log_pdf(x)


class HyvarinenScore(ScoringRule):
    name = "hy"

    def _score(self, p, x):
        return 2.0 * p._d2ratio(x) - p._dlog(x) ** 2


class ConditionalLikelihood(ScoringRule):
    """-w(x) log p(x) + w(x) log(int p w)."""

    def __init__(self, weight):
        self.weight = weight
        self.name = f"cl({weight!r})"

    def _score(self, p, x):
        wv = self.weight._eval(x)
        m = self.weight.mass(p)
        return _masked_nlogp(p, x, wv) + wv * math.log(m)


class CensoredLikelihood(ScoringRule):
    """-w(x) log p(x) - (1 - w(x)) log(1 - int w p)."""

    def __init__(self, weight):
        self.weight = weight
        self.name = f"csl({weight!r})"

    def _score(self, p, x):
        wv = self.weight._eval(x)
        m = self.weight.mass(p)
        with np.errstate(divide="ignore", invalid="ignore"):
            neg_log_rest = -np.log1p(-m)
            out_term = np.where(wv < 1.0, (1.0 - wv) * neg_log_rest, 0.0)
        return _masked_nlogp(p, x, wv) + out_term


class PenalizedWeightedLikelihood(ScoringRule):
    """-w(x) log p(x) - w(x) + int p w."""

    def __init__(self, weight):
        self.weight = weight
        self.name = f"pwl({weight!r})"

    def _score(self, p, x):
        wv = self.weight._eval(x)
        m = self.weight.mass(p)
        return _masked_nlogp(p, x, wv) - wv + m


class WeightedHyvarinen(ScoringRule):
    """2 (p''/p) w - (p'/p)^2 w + 2 (p'/p) w'; requires a C^1 weight."""

    def __init__(self, weight):
        if not weight.smooth:
            raise ConfigError("the weighted Hyvarinen score requires a smooth weight")
        self.weight = weight
        self.name = f"wh({weight!r})"

    def _score(self, p, x):
        wv = self.weight._eval(x)
        wd = self.weight._deriv(x)
        dl = p._dlog(x)
        main = np.where(wv != 0.0, (2.0 * p._d2ratio(x) - dl * dl) * wv, 0.0)
        ramp = np.where(wd != 0.0, 2.0 * dl * wd, 0.0)
        return main + ramp


class TwCRPS(ScoringRule):
    """Threshold-weighted CRPS: int (F_p(z) - 1{x <= z})^2 w(z) dz.

    The pointwise path integrates adaptively with the jump at z = x split
    out; `table` builds a spline-backed scorer for batch evaluation that is
    deterministic and shares every node with densities that agree on the
    weighted region (so equal forecasts give bitwise-equal scores).
    """

    _EPS_TAIL = 1e-9

    def __init__(self, weight):
        self.weight = weight
        self.name = f"twcrps({weight!r})"

    def _bounds(self, p, x=None):
        lo, hi = _weight_support(self.weight)
        ql, qu = p.quantile(self._EPS_TAIL), p.quantile(1.0 - self._EPS_TAIL)
        a = ql - 1.0 if math.isinf(lo) else lo
        b = qu + 1.0 if math.isinf(hi) else hi
        if x is not None:
            if math.isinf(lo):
                a = min(a, x - 1.0)
            if math.isinf(hi):
                b = max(b, x + 1.0)
        return a, b

    def _score(self, p, x):
        return np.array([self._point(p, float(xi)) for xi in np.ravel(x)]).reshape(x.shape)

    def _point(self, p, x):
        a, b = self._bounds(p, x)
        if a >= b:
            return 0.0
        w = self.weight

        def f(z):
            return (p.cdf(z) - (1.0 if x <= z else 0.0)) ** 2 * w.eval(z)

        pts = [t for t in (x,) + tuple(w.breakpoints()) if a < t < b]
        val, err = integrate.quad(f, a, b, points=sorted(set(pts)) or None,
                                  epsabs=1e-9, limit=500)
        if err > 1e-6 * max(1.0, abs(val)):
            raise IntegrationError(f"twCRPS quadrature did not converge at x={x}")
        return val

    def table(self, p, step=0.0025, max_nodes=250_000):
        """Vectorized scorer x -> score via cumulative Simpson + cubic splines."""
        lo, hi = _weight_support(self.weight)
        a, b = self._bounds(p)
        h = max(step, (b - a) / max_nodes)
        n = int(math.ceil((b - a) / h)) + 1
        z = np.linspace(a, b, n)
        F = p._cdf(z)
        wv = self.weight._eval(z)
        below = F * F * wv                 # integrand left of the observation
        above = (F - 1.0) ** 2 * wv        # integrand right of the observation
        P = np.concatenate([[0.0], integrate.cumulative_simpson(below, x=z)])
        Q = np.concatenate([[0.0], integrate.cumulative_simpson(above, x=z)])
        tail_hi = 0.0
        if math.isinf(hi):
            tail_hi = integrate.quad(lambda t: (1.0 - p.cdf(t)) ** 2, b, math.inf,
                                     epsabs=1e-12, limit=200)[0]
        tail_lo = 0.0
        if math.isinf(lo):
            tail_lo = integrate.quad(lambda t: p.cdf(t) ** 2, -math.inf, a,
                                     epsabs=1e-12, limit=200)[0]
        qtot = Q[-1] + tail_hi
        sp = CubicSpline(z, P)
        sq = CubicSpline(z, Q)
        lo_open = math.isinf(lo)
        hi_open = math.isinf(hi)

        def scorer(x):
            x = np.asarray(x, dtype=float)
            xc = np.clip(x, a, b)
            val = tail_lo + sp(xc) + (qtot - sq(xc))
            if hi_open:
                val = val + np.where(x > b, x - b, 0.0)
            if lo_open:
                val = val + np.where(x < a, a - x, 0.0)
            return val

        return scorer


def CRPS():
    """Unweighted CRPS as twCRPS with constant weight one."""
    rule = TwCRPS(Constant(1))
    rule.name = "crps"
    return rule


class QuantileCRPS(ScoringRule):
    """Quantile-weighted CRPS with v(alpha) = 1{alpha >= r_alpha}.

    Fixed 512-node composite Simpson grid split at the kink alpha = F_p(x),
    truncated at 1 - 1e-10.
    """

    _NODES = 512

    def __init__(self, r_alpha):
        if not 0.0 < r_alpha < 1.0:
            raise DomainError("qcrps threshold must lie in (0, 1)")
        self.r_alpha = float(r_alpha)
        self.name = f"qcrps({r_alpha:g})"

    def _score(self, p, x):
        return np.array([self._point(p, float(xi)) for xi in np.ravel(x)]).reshape(x.shape)

    def _point(self, p, x):
        top = 1.0 - 1e-10
        lo = self.r_alpha
        kink = min(max(p.cdf(x), lo), top)
        half = self._NODES // 2

        def seg(a, b, m):
            if b - a <= 0.0:
                return 0.0
            alpha = np.linspace(a, b, 2 * m + 1)
            q = p._quantile(np.clip(alpha, 1e-300, top))
            qs = 2.0 * ((x < q).astype(float) - alpha) * (q - x)
            return integrate.simpson(qs, x=alpha)

        return seg(lo, kink, half) + seg(kink, top, half)


class BinaryScore:
    name = "?"

    def eval(self, alpha, z):
        raise NotImplementedError


class BarS(BinaryScore):
    """s(alpha, z) = -z (log alpha + 1) + alpha."""

    name = "bars"

    def eval(self, alpha, z):
        return -z * (np.log(alpha) + 1.0) + alpha


class LogLoss(BinaryScore):
    """s(alpha, z) = -z log alpha - (1 - z) log(1 - alpha)."""

    name = "logloss"

    def eval(self, alpha, z):
        return -z * np.log(alpha) - (1.0 - z) * np.log1p(-alpha)


class BinaryAugmented(ScoringRule):
    """w(x) s(int pw, 1) + (1 - w(x)) s(int pw, 0) for a binary score s."""

    def __init__(self, binary, weight):
        if not weight.is_indicator:
            raise ConfigError("binary-score augmentation needs an indicator-kind weight")
        self.binary = binary
        self.weight = weight
        self.name = f"aug[{binary.name}]({weight!r})"

    def _score(self, p, x):
        m = self.weight.mass(p)
        wv = self.weight._eval(x)
        return wv * self.binary.eval(m, 1.0) + (1.0 - wv) * self.binary.eval(m, 0.0)


class ConditionalRule(ScoringRule):
    """w(x) * base(p_w, x) with p_w the renormalized density (Theorem-1 style)."""

    def __init__(self, base, weight):
        if not isinstance(base, LogScore):
            raise ConfigError("conditional construction supports the logarithmic base score only")
        self.base = base
        self.weight = weight
        self.name = f"cond[{base.name}]({weight!r})"

    def _score(self, p, x):
        wv = self.weight._eval(x)
        m = self.weight.mass(p)
        with np.errstate(divide="ignore", invalid="ignore"):
            wlogw = np.where(wv > 0.0, wv * np.log(wv), 0.0)
        return _masked_nlogp(p, x, wv) + wv * math.log(m) - wlogw


class SumRule(ScoringRule):
    def __init__(self, parts):
        self.parts = list(parts)
        self.name = "+".join(r.name for r in self.parts)

    def _score(self, p, x):
        total = self.parts[0]._score(p, x)
        for r in self.parts[1:]:
            total = total + r._score(p, x)
        return total


def conditional_rule(base, weight):
    return ConditionalRule(base, weight)


def binary_augmented(binary, weight):
    return BinaryAugmented(binary, weight)


def _quad_points(rule, p, q, a, b):
    pts = set()
    if rule.weight is not None:
        pts.update(rule.weight.breakpoints())
    pts.update(p.breakpoints())
    pts.update(q.breakpoints())
    return sorted(t for t in pts if a < t < b)


def expected_score(rule, p, q, epsabs=1e-9):
    """S(p, q; w) = int S(p, x; w) q(x) dx by adaptive quadrature."""
    a = q.quantile(1e-14)
    b = q.quantile(1.0 - 1e-14)
    if isinstance(rule, TwCRPS):
        scorer = rule.table(p)

        def f(x):
            return float(scorer(x)) * q.pdf(x)
    else:
        def f(x):
            return rule.score(p, x) * q.pdf(x)

    pts = _quad_points(rule, p, q, a, b)
    with np.errstate(over="ignore"):
        val, err = integrate.quad(f, a, b, points=pts or None, epsabs=epsabs, limit=800)
    if not math.isfinite(val) or err > 1e-5 * max(1.0, abs(val)):
        raise IntegrationError(
            f"expected score of {rule.name} did not converge (val={val}, err={err})"
        )
    return val


def divergence(rule, p, q, epsabs=1e-9):
    """S(p, q; w) - S(q, q; w); nonnegative for proper rules."""
    return expected_score(rule, p, q, epsabs) - expected_score(rule, q, q, epsabs)


def _broadcast_stream(stream, n):
    if isinstance(stream, Density):
        return [stream] * n
    stream = list(stream)
    if len(stream) != n:
        raise DomainError(f"forecast stream length {len(stream)} != {n} observations")
    return stream


def score_series(rule, forecasts, observations):
    """Pointwise scores of a forecast stream against observations."""
    obs = np.asarray(observations, dtype=float)
    fs = _broadcast_stream(forecasts, obs.size)
    return np.array([rule.score(p, float(x)) for p, x in zip(fs, obs)])


def score_diff_series(rule, forecasts1, forecasts2, observations):
    """diff[k] = S(p1_k, x_k) - S(p2_k, x_k); rejects indeterminate inf - inf."""
    s1 = score_series(rule, forecasts1, observations)
    s2 = score_series(rule, forecasts2, observations)
    both_inf = np.isinf(s1) & np.isinf(s2) & (np.sign(s1) == np.sign(s2))
    if np.any(both_inf):
        raise DomainError("indeterminate inf - inf score difference")
    return s1 - s2


_RULE_RE = re.compile(r"^\s*([a-zA-Z_]+)\s*(?:\((.*)\))?\s*$")

_WEIGHTED = {
    "twcrps": TwCRPS,
    "csl": CensoredLikelihood,
    "cl": ConditionalLikelihood,
    "pwl": PenalizedWeightedLikelihood,
    "wh": WeightedHyvarinen,
}


def parse_rule(spec):
    """Parse the rule grammar: logs, crps, hy, qcrps(0.9), csl(right(1)), ..."""
    m = _RULE_RE.match(spec)
    if not m:
        raise GrammarError(f"cannot parse rule spec {spec!r}")
    name = m.group(1).lower()
    arg = m.group(2)
    if name == "logs":
        return LogScore()
    if name == "crps":
        return CRPS()
    if name == "hy":
        return HyvarinenScore()
    if name == "qcrps":
        if arg is None:
            raise GrammarError("qcrps requires a quantile threshold, e.g. qcrps(0.9)")
        try:
            r_alpha = float(arg)
        except ValueError as exc:
            raise GrammarError(f"non-numeric qcrps threshold {arg!r}") from exc
        return QuantileCRPS(r_alpha)
    if name in _WEIGHTED:
        if arg is None:
            raise GrammarError(f"{name} requires a weight, e.g. {name}(right(1))")
        try:
            return _WEIGHTED[name](parse_weight(arg))
        except ConfigError as exc:
            raise GrammarError(str(exc)) from exc
    raise GrammarError(f"unknown scoring rule: {spec!r}")
