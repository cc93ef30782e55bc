"""Univariate parametric densities with the analytic machinery needed for scoring.

Every density exposes pdf, log_pdf, cdf, quantile, sampling and the two
log-derivative ratios dlog = p'/p and d2ratio = p''/p used by the Hyvarinen
family of scores.  All operations accept scalars or numpy arrays and are pure;
sampling takes an explicit numpy Generator owned by the caller.
"""

from __future__ import annotations

import math
import re

import numpy as np
from scipy import special, stats

from .errors import ConfigError, DomainError, GrammarError

__all__ = [
    "Density",
    "Normal",
    "ScaledT",
    "Spliced",
    "CdfMix",
    "SkewT",
    "make_hlt",
    "make_hrt",
    "make_cdfmix_G",
    "make_cdfmix_H",
    "tail_matched",
    "tail_scaled",
    "parse_density",
    "HLT_SCALE",
]

# Scale making a t4 density continuous with the standard normal at 0:
# t4(0) = 3/8 exactly, phi(0) = 1/sqrt(2*pi).
HLT_SCALE = 0.375 * math.sqrt(2.0 * math.pi)

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _scalarize(x, out):
    out = np.asarray(out)
    return out.item() if np.ndim(x) == 0 else out


class Density:
    """Base class: array-valued kernels live in the underscore methods."""

    def pdf(self, x):
        return _scalarize(x, self._pdf(np.asarray(x, dtype=float)))

    def log_pdf(self, x):
        return _scalarize(x, self._log_pdf(np.asarray(x, dtype=float)))

    def cdf(self, x):
        return _scalarize(x, self._cdf(np.asarray(x, dtype=float)))

    def quantile(self, u):
        ua = np.asarray(u, dtype=float)
        if np.any((ua <= 0.0) | (ua >= 1.0)):
            raise DomainError("quantile argument must lie in the open interval (0, 1)")
        return _scalarize(u, self._quantile(ua))

    def dlog(self, x):
        return _scalarize(x, self._dlog(np.asarray(x, dtype=float)))

    def d2ratio(self, x):
        return _scalarize(x, self._d2ratio(np.asarray(x, dtype=float)))

    def sample(self, rng, size=None):
        """Draw by cdf inversion from the caller's Generator."""
        u = rng.random(size)
        return self._quantile(np.atleast_1d(u)) if size is not None else float(self._quantile(np.asarray([u]))[0])

    def breakpoints(self):
        """Points where pdf or its derivatives may kink (quadrature splits)."""
        return ()

    def support_interval(self, eps=1e-10):
        return self.quantile(eps), self.quantile(1.0 - eps)

    # -- kernels ----------------------------------------------------------
    def _pdf(self, x):
        raise NotImplementedError

    def _log_pdf(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self._pdf(x))

    def _cdf(self, x):
        raise NotImplementedError

    def _quantile(self, u):
        lo, hi = self._bracket(u)
        return _bisect_cdf(self._cdf, u, lo, hi)

    def _bracket(self, u):
        raise NotImplementedError

    def _dlog(self, x):
        raise NotImplementedError

    def _d2ratio(self, x):
        # d2ratio = dlog' + dlog^2; dlog' by Richardson-extrapolated central
        # differences (composite families lack convenient third derivatives).
        h = 1e-4 * np.maximum(1.0, np.abs(x))
        d1 = (self._dlog(x + h) - self._dlog(x - h)) / (2.0 * h)
        d2 = (self._dlog(x + 0.5 * h) - self._dlog(x - 0.5 * h)) / h
        dprime = (4.0 * d2 - d1) / 3.0
        return dprime + self._dlog(x) ** 2


def _bisect_cdf(cdf, u, lo, hi, iters=200, tol=1e-10):
    lo = np.broadcast_to(np.asarray(lo, float), u.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, float), u.shape).copy()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = cdf(mid) < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.max(hi - lo) < tol:
            break
    return 0.5 * (lo + hi)


class Normal(Density):
    def __init__(self, mu, sigma):
        if sigma <= 0:
            raise DomainError("normal sigma must be positive")
        self.mu = float(mu)
        self.sigma = float(sigma)

    def __repr__(self):
        return f"normal({self.mu:g},{self.sigma:g})"

    def _z(self, x):
        return (x - self.mu) / self.sigma

    def _pdf(self, x):
        z = self._z(x)
        return np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi))

    def _log_pdf(self, x):
        z = self._z(x)
        return -0.5 * z * z - _LOG_SQRT_2PI - math.log(self.sigma)

    def _cdf(self, x):
        return special.ndtr(self._z(x))

    def _quantile(self, u):
        return self.mu + self.sigma * special.ndtri(u)

    def _dlog(self, x):
        return -self._z(x) / self.sigma

    def _d2ratio(self, x):
        z = self._z(x)
        return (z * z - 1.0) / (self.sigma * self.sigma)


class ScaledT(Density):
    """Student t with nu degrees of freedom, scaled and shifted."""

    def __init__(self, nu, scale, loc=0.0):
        if nu <= 0 or scale <= 0:
            raise DomainError("scaledt requires nu > 0 and scale > 0")
        self.nu = float(nu)
        self.scale = float(scale)
        self.loc = float(loc)

    def __repr__(self):
        return f"scaledt({self.nu:g},{self.scale:g},{self.loc:g})"

    def _z(self, x):
        return (x - self.loc) / self.scale

    def _pdf(self, x):
        return stats.t.pdf(self._z(x), self.nu) / self.scale

    def _log_pdf(self, x):
        return stats.t.logpdf(self._z(x), self.nu) - math.log(self.scale)

    def _cdf(self, x):
        return stats.t.cdf(self._z(x), self.nu)

    def _quantile(self, u):
        return self.loc + self.scale * stats.t.ppf(u, self.nu)

    def _dlog(self, x):
        z = self._z(x)
        return -(self.nu + 1.0) * z / (self.nu + z * z) / self.scale

    def _d2ratio(self, x):
        z = self._z(x)
        dl = -(self.nu + 1.0) * z / (self.nu + z * z)
        dl1 = -(self.nu + 1.0) * (self.nu - z * z) / (self.nu + z * z) ** 2
        return (dl1 + dl * dl) / (self.scale * self.scale)


class Spliced(Density):
    """Two component densities glued at a knot with a prescribed right mass.

    pdf(x) = (1-m) * left.pdf(x)/left.cdf(k)        for x <= k,
             m * right.pdf(x)/(1-right.cdf(k))      for x > k,

    with m = right_mass.  When m equals the right component's own tail mass
    the factors are exactly 1 and the spliced density reproduces the
    component values bit for bit (relied upon by the simulation scenarios).
    """

    def __init__(self, left, right, knot, right_mass):
        if not 0.0 < right_mass < 1.0:
            raise DomainError("right_mass must lie in (0, 1)")
        self.left = left
        self.right = right
        self.knot = float(knot)
        self.right_mass = float(right_mass)
        fl = left.cdf(self.knot)
        fr_tail = 1.0 - right.cdf(self.knot)
        if fl <= 0.0 or fr_tail <= 0.0:
            raise DomainError("components carry no mass on their side of the knot")
        self._lfac = (1.0 - self.right_mass) / fl
        self._rfac = self.right_mass / fr_tail
        self._log_lfac = math.log(self._lfac)
        self._log_rfac = math.log(self._rfac)
        self._cdf_knot = 1.0 - self.right_mass

    def __repr__(self):
        return f"spliced({self.left!r},{self.right!r},{self.knot:g},{self.right_mass:g})"

    def breakpoints(self):
        pts = (self.knot,)
        return pts + tuple(self.left.breakpoints()) + tuple(self.right.breakpoints())

    def _pdf(self, x):
        return np.where(
            x <= self.knot,
            self._lfac * self.left._pdf(x),
            self._rfac * self.right._pdf(x),
        )

    def _log_pdf(self, x):
        return np.where(
            x <= self.knot,
            self.left._log_pdf(x) + self._log_lfac,
            self.right._log_pdf(x) + self._log_rfac,
        )

    def _cdf(self, x):
        return np.where(
            x <= self.knot,
            self._lfac * self.left._cdf(x),
            1.0 - self._rfac * (1.0 - self.right._cdf(x)),
        )

    def _quantile(self, u):
        # Evaluate both branches on clipped targets, then select.
        tl = np.clip(u / self._lfac, 1e-300, 1.0 - 1e-16)
        tr = np.clip(1.0 - (1.0 - u) / self._rfac, 1e-16, 1.0 - 1e-300)
        return np.where(
            u <= self._cdf_knot,
            self.left._quantile(tl),
            self.right._quantile(tr),
        )

    def _dlog(self, x):
        return np.where(x <= self.knot, self.left._dlog(x), self.right._dlog(x))

    def _d2ratio(self, x):
        return np.where(x <= self.knot, self.left._d2ratio(x), self.right._d2ratio(x))


class CdfMix(Density):
    """cdf F(x) = B(x) F1(x) + (1 - B(x)) F2(x) for cdfs B, F1, F2.

    The pdf comes from the analytic product rule; the construction is
    validated on a grid and rejected if the mix fails to be a density.
    """

    def __init__(self, blend, comp1, comp2, _validate=True):
        self.blend = blend
        self.comp1 = comp1
        self.comp2 = comp2
        if _validate:
            lo = min(comp1.quantile(1e-6), comp2.quantile(1e-6))
            hi = max(comp1.quantile(1.0 - 1e-6), comp2.quantile(1.0 - 1e-6))
            grid = np.linspace(lo, hi, 2001)
            if np.min(self._pdf(grid)) < -1e-12:
                raise ConfigError("cdf mix has negative density: invalid construction")

    def __repr__(self):
        return f"cdfmix({self.blend!r},{self.comp1!r},{self.comp2!r})"

    def _cdf(self, x):
        b = self.blend._cdf(x)
        return b * self.comp1._cdf(x) + (1.0 - b) * self.comp2._cdf(x)

    def _pdf(self, x):
        b = self.blend._cdf(x)
        db = self.blend._pdf(x)
        f1, f2 = self.comp1._cdf(x), self.comp2._cdf(x)
        return db * (f1 - f2) + b * self.comp1._pdf(x) + (1.0 - b) * self.comp2._pdf(x)

    def _pdf_deriv(self, x):
        b = self.blend._cdf(x)
        db = self.blend._pdf(x)
        ddb = db * self.blend._dlog(x)
        p1, p2 = self.comp1._pdf(x), self.comp2._pdf(x)
        dp1 = p1 * self.comp1._dlog(x)
        dp2 = p2 * self.comp2._dlog(x)
        f1, f2 = self.comp1._cdf(x), self.comp2._cdf(x)
        return ddb * (f1 - f2) + 2.0 * db * (p1 - p2) + b * dp1 + (1.0 - b) * dp2

    def _dlog(self, x):
        return self._pdf_deriv(x) / self._pdf(x)

    def _bracket(self, u):
        q1 = self.comp1._quantile(u)
        q2 = self.comp2._quantile(u)
        return np.minimum(q1, q2), np.maximum(q1, q2)


class SkewT(Density):
    """Skewed t in the Fernandez-Steel parameterization.

    Standardized density: f(z) = 2/(g + 1/g) * [t_nu(z/g) on z >= 0,
    t_nu(g z) on z < 0] for skewness g > 0, then shifted/scaled.
    """

    def __init__(self, nu, skewness, loc=0.0, scale=1.0):
        if nu <= 0 or skewness <= 0 or scale <= 0:
            raise DomainError("skewt requires nu, skewness, scale > 0")
        self.nu = float(nu)
        self.skewness = float(skewness)
        self.loc = float(loc)
        self.scale = float(scale)
        g = self.skewness
        self._norm = 2.0 / (g + 1.0 / g)
        self._cdf0 = 1.0 / (1.0 + g * g)

    def __repr__(self):
        return f"skewt({self.nu:g},{self.skewness:g},{self.loc:g},{self.scale:g})"

    def breakpoints(self):
        return (self.loc,)

    def _z(self, x):
        return (x - self.loc) / self.scale

    def _arg(self, z):
        g = self.skewness
        return np.where(z >= 0.0, z / g, z * g)

    def _pdf(self, x):
        z = self._z(x)
        return self._norm * stats.t.pdf(self._arg(z), self.nu) / self.scale

    def _log_pdf(self, x):
        z = self._z(x)
        return (
            math.log(self._norm)
            + stats.t.logpdf(self._arg(z), self.nu)
            - math.log(self.scale)
        )

    def _cdf(self, x):
        z = self._z(x)
        g = self.skewness
        tv = stats.t.cdf(self._arg(z), self.nu)
        left = 2.0 * self._cdf0 * tv
        right = self._cdf0 + 2.0 * g * g * self._cdf0 * (tv - 0.5)
        return np.where(z < 0.0, left, right)

    def _quantile(self, u):
        g = self.skewness
        tl = np.clip(u / (2.0 * self._cdf0), 1e-300, 1.0)
        tr = np.clip((u - self._cdf0) / (2.0 * g * g * self._cdf0) + 0.5, 0.0, 1.0 - 1e-300)
        zl = stats.t.ppf(tl, self.nu) / g
        zr = stats.t.ppf(tr, self.nu) * g
        z = np.where(u < self._cdf0, zl, zr)
        return self.loc + self.scale * z

    def _dlog(self, x):
        z = self._z(x)
        nu = self.nu
        a = self._arg(z)
        dl = -(nu + 1.0) * a / (nu + a * a)
        g = self.skewness
        jac = np.where(z >= 0.0, 1.0 / g, g)
        return dl * jac / self.scale

    def _d2ratio(self, x):
        z = self._z(x)
        nu = self.nu
        a = self._arg(z)
        dl = -(nu + 1.0) * a / (nu + a * a)
        dl1 = -(nu + 1.0) * (nu - a * a) / (nu + a * a) ** 2
        g = self.skewness
        jac = np.where(z >= 0.0, 1.0 / g, g)
        return (dl1 + dl * dl) * (jac / self.scale) ** 2


def make_hlt():
    """Heavy left tail: scaled t4 on (-inf, 0], standard normal on (0, inf)."""
    return Spliced(ScaledT(4.0, HLT_SCALE), Normal(0.0, 1.0), knot=0.0, right_mass=0.5)


def make_hrt():
    """Heavy right tail: standard normal on (-inf, 0], scaled t4 on (0, inf)."""
    return Spliced(Normal(0.0, 1.0), ScaledT(4.0, HLT_SCALE), knot=0.0, right_mass=0.5)


def make_cdfmix_G():
    """G(x) = Phi_{0,1/2}(x) Phi(x) + (1 - Phi_{0,1/2}(x)) F4(x)."""
    return CdfMix(Normal(0.0, 0.5), Normal(0.0, 1.0), ScaledT(4.0, 1.0))


def make_cdfmix_H():
    """H(x) = (1 - Phi_{0,1/2}(x)) Phi(x) + Phi_{0,1/2}(x) F4(x)."""
    return CdfMix(Normal(0.0, 0.5), ScaledT(4.0, 1.0), Normal(0.0, 1.0))


def tail_matched(base, knot, off):
    """Density equal to `base` on [knot, inf) with `off`'s shape below the knot.

    Keeps the tail mass of `base`, so the result satisfies the composite null
    hypothesis generated by `base` and the region [knot, inf).
    """
    return Spliced(off, base, knot, right_mass=1.0 - base.cdf(knot))


def tail_scaled(base, knot, factor, off):
    """Density proportional to `base` (factor c) on [knot, inf), `off` below."""
    rm = factor * (1.0 - base.cdf(knot))
    if not 0.0 < rm < 1.0:
        raise DomainError("scaled tail mass must lie in (0, 1)")
    return Spliced(off, base, knot, right_mass=rm)


_SPEC_RE = re.compile(r"^\s*([a-zA-Z_]+)\s*(?:\(\s*([^()]*)\s*\))?\s*$")


def parse_density(spec):
    """Parse the density grammar, e.g. normal(0,1), scaledt(4,0.94,0), hlt, G."""
    m = _SPEC_RE.match(spec)
    if not m:
        raise GrammarError(f"cannot parse density spec {spec!r}")
    name = m.group(1).lower()
    args = []
    if m.group(2):
        try:
            args = [float(tok) for tok in m.group(2).split(",") if tok.strip()]
        except ValueError as exc:
            raise GrammarError(f"non-numeric parameter in density spec {spec!r}") from exc
    try:
        if name == "normal" and len(args) == 2:
            return Normal(*args)
        if name == "scaledt" and len(args) in (2, 3):
            return ScaledT(*args)
        if name == "skewt" and len(args) in (2, 3, 4):
            return SkewT(*args)
        if name == "hlt" and not args:
            return make_hlt()
        if name == "hrt" and not args:
            return make_hrt()
        if name == "g" and not args:
            return make_cdfmix_G()
        if name == "h" and not args:
            return make_cdfmix_H()
    except DomainError as exc:
        raise GrammarError(f"invalid parameters in density spec {spec!r}: {exc}") from exc
    raise GrammarError(f"unknown density family or wrong arity: {spec!r}")
