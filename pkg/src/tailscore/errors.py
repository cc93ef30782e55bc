"""Exception types shared across the package."""


class TailscoreError(Exception):
    """Base class for all package-specific errors."""


class GrammarError(TailscoreError, ValueError):
    """A density/weight/rule specification string could not be parsed."""


class DomainError(TailscoreError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DegenerateMassError(TailscoreError, ValueError):
    """A weight region carries (numerically) zero forecast mass."""


class ConfigError(TailscoreError, ValueError):
    """An invalid configuration (simulation, test spec, rule/weight combo)."""


class IntegrationError(TailscoreError, ArithmeticError):
    """Quadrature failed to converge on an integrable-looking problem."""
