"""
Exceptions raised by the bope package.

Every error derives from BopeError so that callers can catch the whole family,
and also from the closest builtin so that generic handlers keep working.
"""


class BopeError(Exception):
    """Base class of all bope errors."""


class DataError(BopeError, ValueError):
    """Invalid dataset, CSV content or evaluation instance."""


class ConfigError(BopeError, ValueError):
    """
    Invalid run configuration.

    :param field: Dotted path of the offending key (eg. `solver.outer_tol`).
    :param reason: Human readable reason.
    """

    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason


class KernelError(BopeError, ArithmeticError):
    """Gram matrix could not be factorized even at the jitter cap."""


class PropensityError(BopeError, ValueError):
    """Logging density vanishes where the target density does not."""


class HyperfitError(BopeError, ArithmeticError):
    """Evidence could not be evaluated for a hyperparameter candidate."""


class OracleError(BopeError, ValueError):
    """Instance is too large for grid enumeration."""
