"""Weight functions w: R -> [0, 1] with derivatives and forecast mass."""

from __future__ import annotations

import math
import re

import numpy as np
from scipy import integrate

from .densities import _scalarize
from .errors import DegenerateMassError, DomainError, GrammarError

__all__ = [
    "WeightFunction",
    "IndicatorRight",
    "IndicatorLeft",
    "IndicatorInterval",
    "SmoothRight",
    "Constant",
    "Complement",
    "parse_weight",
]

_MIN_MASS = 1e-300


class WeightFunction:
    #: True when the weight takes only the values 0 and 1 (indicator-like);
    #: required by the binary-score augmentation and the NP test region.
    is_indicator = False
    #: True when deriv() is defined (C^1 weights, needed by the WH score).
    smooth = False

    def eval(self, x):
        return _scalarize(x, self._eval(np.asarray(x, dtype=float)))

    __call__ = eval

    def deriv(self, x):
        if not self.smooth:
            raise DomainError(f"derivative of non-smooth weight {self!r} is undefined")
        return _scalarize(x, self._deriv(np.asarray(x, dtype=float)))

    def mass(self, p):
        """Forecast mass integral of p times w."""
        m = self._mass(p)
        if m <= _MIN_MASS:
            raise DegenerateMassError(f"forecast mass under {self!r} is numerically zero")
        return min(m, 1.0)

    def complement(self):
        raise DomainError(f"complement of {self!r} is not supported")

    def breakpoints(self):
        return ()

    def _eval(self, x):
        raise NotImplementedError

    def _deriv(self, x):
        raise NotImplementedError

    def _mass(self, p):
        raise NotImplementedError


class IndicatorRight(WeightFunction):
    """w(z) = 1{z >= r}."""

    is_indicator = True

    def __init__(self, r):
        self.r = float(r)

    def __repr__(self):
        return f"right({self.r:g})"

    def _eval(self, x):
        return (x >= self.r).astype(float)

    def _mass(self, p):
        return 1.0 - p.cdf(self.r)

    def complement(self):
        return Complement(self)

    def breakpoints(self):
        return (self.r,)


class IndicatorLeft(WeightFunction):
    """w(z) = 1{z <= r}."""

    is_indicator = True

    def __init__(self, r):
        self.r = float(r)

    def __repr__(self):
        return f"left({self.r:g})"

    def _eval(self, x):
        return (x <= self.r).astype(float)

    def _mass(self, p):
        return p.cdf(self.r)

    def complement(self):
        return Complement(self)

    def breakpoints(self):
        return (self.r,)


class IndicatorInterval(WeightFunction):
    """w(z) = 1{a <= z <= b}."""

    is_indicator = True

    def __init__(self, a, b):
        if not a < b:
            raise DomainError("interval weight requires a < b")
        self.a = float(a)
        self.b = float(b)

    def __repr__(self):
        return f"interval({self.a:g},{self.b:g})"

    def _eval(self, x):
        return ((x >= self.a) & (x <= self.b)).astype(float)

    def _mass(self, p):
        return p.cdf(self.b) - p.cdf(self.a)

    def complement(self):
        return Complement(self)

    def breakpoints(self):
        return (self.a, self.b)


class SmoothRight(WeightFunction):
    """C^1 ramp approximation of 1{z >= r} on (r - delta, r + delta).

    w(x) = wtilde((x - r + delta) / (2 delta)) with wtilde(y) = 3y^2 - 2y^3.
    """

    smooth = True

    def __init__(self, r, delta=0.5):
        if delta <= 0:
            raise DomainError("smoothright delta must be positive")
        self.r = float(r)
        self.delta = float(delta)

    def __repr__(self):
        return f"smoothright({self.r:g},{self.delta:g})"

    def _y(self, x):
        return (x - self.r + self.delta) / (2.0 * self.delta)

    def _eval(self, x):
        y = np.clip(self._y(x), 0.0, 1.0)
        return y * y * (3.0 - 2.0 * y)

    def _deriv(self, x):
        y = self._y(x)
        inside = (y > 0.0) & (y < 1.0)
        return np.where(inside, 6.0 * y * (1.0 - y) / (2.0 * self.delta), 0.0)

    def _mass(self, p):
        lo, hi = self.r - self.delta, self.r + self.delta
        ramp, _ = integrate.quad(
            lambda z: p.pdf(z) * self.eval(z), lo, hi, epsabs=1e-12, limit=200
        )
        return ramp + (1.0 - p.cdf(hi))

    def breakpoints(self):
        return (self.r - self.delta, self.r + self.delta)


class Constant(WeightFunction):
    """w identically 0 or 1."""

    is_indicator = True
    smooth = True

    def __init__(self, c):
        if c not in (0, 1):
            raise DomainError("constant weight must be 0 or 1")
        self.c = float(c)

    def __repr__(self):
        return "one" if self.c == 1.0 else "zero"

    def _eval(self, x):
        return np.full_like(x, self.c)

    def _deriv(self, x):
        return np.zeros_like(x)

    def _mass(self, p):
        return self.c

    def complement(self):
        return Constant(1 - int(self.c))


class Complement(WeightFunction):
    """Pointwise 1 - w for an indicator-kind weight."""

    is_indicator = True

    def __init__(self, inner):
        if not inner.is_indicator:
            raise DomainError("complement is only defined for indicator-kind weights")
        self.inner = inner

    def __repr__(self):
        return f"1-{self.inner!r}"

    def _eval(self, x):
        return 1.0 - self.inner._eval(x)

    def _mass(self, p):
        return 1.0 - self.inner._mass(p)

    def complement(self):
        return self.inner

    def breakpoints(self):
        return self.inner.breakpoints()


_SPEC_RE = re.compile(r"^\s*([a-zA-Z_]+)\s*(?:\(\s*([^()]*)\s*\))?\s*$")


def parse_weight(spec):
    """Parse the weight grammar: right(r), left(r), interval(a,b),
    smoothright(r,delta), one."""
    m = _SPEC_RE.match(spec)
    if not m:
        raise GrammarError(f"cannot parse weight spec {spec!r}")
    name = m.group(1).lower()
    args = []
    if m.group(2):
        try:
            args = [float(tok) for tok in m.group(2).split(",") if tok.strip()]
        except ValueError as exc:
            raise GrammarError(f"non-numeric parameter in weight spec {spec!r}") from exc
    try:
        if name == "right" and len(args) == 1:
            return IndicatorRight(args[0])
        if name == "left" and len(args) == 1:
            return IndicatorLeft(args[0])
        if name == "interval" and len(args) == 2:
            return IndicatorInterval(*args)
        if name == "smoothright" and len(args) in (1, 2):
            return SmoothRight(*args)
        if name == "one" and not args:
            return Constant(1)
    except DomainError as exc:
        raise GrammarError(f"invalid parameters in weight spec {spec!r}: {exc}") from exc
    raise GrammarError(f"unknown weight kind or wrong arity: {spec!r}")
