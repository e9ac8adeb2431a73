"""Exception hierarchy.

Every error raised by the library derives from :class:`RetirementModelError`
so callers (and the CLI) can catch one base class and still report which
component failed through the ``component`` attribute.
"""

from __future__ import annotations


class RetirementModelError(Exception):
    """Base class for all library errors."""

    component = "core"


class InvalidParameter(RetirementModelError, ValueError):
    """A field-level parameter constraint failed (sign, range)."""

    component = "model-core"


class NonPositiveArgument(RetirementModelError, ValueError):
    component = "model-core"


class AssumptionViolated(RetirementModelError):
    """A standing model assumption failed.

    Attributes
    ----------
    inequality : str
        Human readable statement of the inequality that must hold.
    lhs, rhs : float
        Evaluated left and right sides.
    """

    component = "model-core"

    def __init__(self, inequality: str, lhs: float, rhs: float):
        self.inequality = inequality
        self.lhs = lhs
        self.rhs = rhs
        super().__init__(f"{type(self).__name__}: requires {inequality}; got lhs={lhs!r}, rhs={rhs!r}")


class KappaNonPositive(AssumptionViolated):
    """Effective income discount r - mu_y + sigma_y*theta is not positive."""


class DiscountRateBelowBound(AssumptionViolated):
    """beta is below the finiteness bound for the post-retirement value."""


class IncomeVolatilityTooHigh(AssumptionViolated):
    """sigma_y * gamma is not below the market price of risk."""


class GammaIsOne(AssumptionViolated):
    """Log utility is not supported."""


# names used by the build contract
Assumption2Violated = DiscountRateBelowBound
Assumption41Violated = IncomeVolatilityTooHigh


class QuadratureNotConverged(RetirementModelError):
    component = "post-retirement"


class NonPositiveWealth(RetirementModelError, ValueError):
    component = "post-retirement"


class BracketNotFound(RetirementModelError):
    """A root bracket could not be established.

    ``bracket`` and ``residuals`` hold the last attempted end points and the
    residual values there.
    """

    component = "boundary-solver"

    def __init__(self, message: str, bracket=None, residuals=None, step=None):
        self.bracket = bracket
        self.residuals = residuals
        self.step = step
        super().__init__(message)


class RootToleranceNotMet(RetirementModelError):
    component = "boundary-solver"


class NegativeValueBeyondTolerance(RetirementModelError):
    component = "boundary-solver"


class MortalityMismatch(RetirementModelError, ValueError):
    """Requested mortality is not on the deterministic path of the solution."""

    component = "boundary-solver"


class InadmissibleWealth(RetirementModelError, ValueError):
    component = "primal-transform"


class GridTooCoarse(RetirementModelError):
    component = "oracle"


class ConfigParse(RetirementModelError):
    component = "cli"
