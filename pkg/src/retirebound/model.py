"""Model parameters, derived constants and closed-form building blocks.

All rates are per year and time is measured in years from the evaluation
date.  The reduced dual variable ``x`` collapses the multiplier ``z`` and
labour income ``y`` into one state; the helpers here are the scalar pieces
that the boundary kernels and the primal maps consume.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import (
    AssumptionViolated,
    DiscountRateBelowBound,
    GammaIsOne,
    IncomeVolatilityTooHigh,
    InvalidParameter,
    KappaNonPositive,
    NonPositiveArgument,
)

__all__ = [
    "ModelParams",
    "DerivedConstants",
    "GammaRegime",
    "AssumptionCheck",
    "check_assumptions",
    "derive_constants",
    "initial_mortality",
    "mortality_at",
    "mortality_integral",
    "q_factor",
    "dual_utility",
    "growth_factor_N",
    "expm1_ratio",
]


@dataclass(frozen=True)
class ModelParams:
    """Market, preference, mortality and horizon inputs.

    ``a = 0`` is accepted as the constant-mortality limit of the Gompertz law.
    """

    mu: float = 0.08
    sigma: float = 0.2
    r: float = 0.04
    beta: float = 0.01
    gamma: float = 3.0
    mu_y: float = 0.01
    sigma_y: float = 0.05
    a: float = 1.0 / 10.5
    T_horizon: float = 10.0
    K: float = 2.0
    m0: float = 0.004

    def __post_init__(self):
        for name in ("sigma", "sigma_y", "T_horizon", "m0", "gamma"):
            if not getattr(self, name) > 0:
                raise InvalidParameter(f"{name} must be > 0, got {getattr(self, name)!r}")
        if not self.a >= 0:
            raise InvalidParameter(f"a must be >= 0, got {self.a!r}")
        if not self.K > 1:
            raise InvalidParameter(f"K must be > 1, got {self.K!r}")
        for f in dataclasses.fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise InvalidParameter(f"{f.name} must be finite")

    @classmethod
    def baseline(cls) -> "ModelParams":
        """Reference calibration used throughout the numerical illustrations."""
        return cls()

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in dataclasses.fields(cls))

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def to_mapping(self) -> dict[str, float]:
        return {name: float(getattr(self, name)) for name in self.field_names()}

    @classmethod
    def from_mapping(cls, data: Mapping[str, object]) -> "ModelParams":
        unknown = set(data) - set(cls.field_names())
        if unknown:
            raise InvalidParameter(f"unknown parameter keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})

    def fingerprint(self) -> str:
        """Stable 16-hex-digit hash of the parameter values."""
        canon = ";".join(f"{k}={v!r}" for k, v in self.to_mapping().items())
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


class GammaRegime(enum.Enum):
    LOW = "LOW"    # gamma < 1: stopping region below the boundary
    HIGH = "HIGH"  # gamma > 1: stopping region above the boundary


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    inequality: str
    lhs: float
    rhs: float
    passed: bool
    error: type = field(repr=False, compare=False, default=AssumptionViolated)

    def to_error(self) -> AssumptionViolated:
        return self.error(self.inequality, self.lhs, self.rhs)


@dataclass(frozen=True)
class DerivedConstants:
    theta: float
    kappa: float
    rho: float
    mu1: float
    sigma1: float
    L_terminal: float
    gamma_regime: GammaRegime
    # convenience values shared by the kernels
    p: float            # (gamma - 1)/gamma, the dual utility exponent
    k_factor: float     # K**((1 - gamma)/gamma)
    reward_coef: float  # (1 - k_factor) * gamma/(1 - gamma)
    overridden: bool = False

    def running_reward(self, x):
        """(1 - K^{(1-g)/g}) U1*(x) + 1, which vanishes at ``L_terminal``."""
        return self.reward_coef * np.power(x, self.p) + 1.0


def check_assumptions(p: ModelParams) -> list[AssumptionCheck]:
    """Evaluate the standing assumptions without raising."""
    g = p.gamma
    theta = (p.mu - p.r) / p.sigma
    kappa = p.r - p.mu_y + p.sigma_y * theta
    beta_floor = (1 - g) * (p.r + 0.5 * theta**2) + (g - 1) ** 2 * theta**2 / (2 * g)
    return [
        AssumptionCheck("gamma_not_one", "gamma != 1", g, 1.0, g != 1.0, GammaIsOne),
        AssumptionCheck("kappa_positive", "kappa = r - mu_y + sigma_y*theta > 0",
                        kappa, 0.0, kappa > 0, KappaNonPositive),
        AssumptionCheck("discount_rate_bound",
                        "beta >= (1-gamma)(r+theta^2/2) + (gamma-1)^2 theta^2/(2 gamma)",
                        p.beta, beta_floor, p.beta >= beta_floor, DiscountRateBelowBound),
        AssumptionCheck("income_volatility_bound", "sigma_y*gamma < theta",
                        p.sigma_y * g, theta, p.sigma_y * g < theta, IncomeVolatilityTooHigh),
    ]


def derive_constants(p: ModelParams, allow_override: bool = False) -> DerivedConstants:
    """Compute every constant the kernels consume.

    Raises the matching :class:`AssumptionViolated` subclass for the first
    failed assumption unless ``allow_override`` is set.  ``gamma == 1`` is
    always an error since the reduction divides by ``1 - gamma``.
    """
    checks = check_assumptions(p)
    failed = [c for c in checks if not c.passed]
    for c in failed:
        if c.error is GammaIsOne or not allow_override:
            raise c.to_error()

    g = p.gamma
    theta = (p.mu - p.r) / p.sigma
    kappa = p.r - p.mu_y + p.sigma_y * theta
    rho = g / (1 - g)
    sigma1 = rho * p.sigma_y - (rho + 1) * theta
    mu1 = (0.5 * (rho + 1) * rho * theta**2 + rho * p.mu_y
           + 0.5 * (rho - 1) * rho * p.sigma_y**2
           - (rho + 1) * rho * theta * p.sigma_y
           + sigma1 * (p.sigma_y - theta))
    k_factor = p.K ** ((1 - g) / g)
    reward_coef = (1 - k_factor) * g / (1 - g)
    L = ((k_factor - 1) * g / (1 - g)) ** (g / (1 - g))
    return DerivedConstants(
        theta=theta, kappa=kappa, rho=rho, mu1=mu1, sigma1=sigma1, L_terminal=L,
        gamma_regime=GammaRegime.HIGH if g > 1 else GammaRegime.LOW,
        p=(g - 1) / g, k_factor=k_factor, reward_coef=reward_coef,
        overridden=bool(failed),
    )


def initial_mortality(age: float, modal_age: float, dispersion: float) -> float:
    """Gompertz force of mortality at ``age``: exp((age - modal)/disp)/disp."""
    return math.exp((age - modal_age) / dispersion) / dispersion


def expm1_ratio(a: float, s):
    """(e^{a s} - 1)/a with the a -> 0 limit s."""
    if a == 0:
        return np.asarray(s, dtype=float) * 1.0
    return np.expm1(a * np.asarray(s, dtype=float)) / a


def mortality_at(m: float, s, a: float):
    """Force of mortality ``s`` years after it equals ``m``."""
    return m * np.exp(a * np.asarray(s, dtype=float))


def mortality_integral(m: float, s, a: float):
    """Integrated hazard over ``[0, s]``: m (e^{a s} - 1)/a."""
    return m * expm1_ratio(a, s)


def q_factor(t, T: float, kappa: float):
    """Annuity factor of labour income; human capital is ``q_factor * y``."""
    tau = T - np.asarray(t, dtype=float)
    if kappa == 0:
        return tau * 1.0
    return -np.expm1(-kappa * tau) / kappa


def dual_utility(x, gamma: float, K: float = 1.0, which: str = "PRE"):
    """Convex dual of the CRRA felicity in reduced coordinates.

    ``PRE`` gives gamma/(1-gamma) x^{(gamma-1)/gamma}; ``POST`` scales it by
    K^{(1-gamma)/gamma}.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise NonPositiveArgument("dual_utility requires x > 0")
    u = gamma / (1 - gamma) * np.power(x, (gamma - 1) / gamma)
    which = which.upper()
    if which == "PRE":
        return u
    if which == "POST":
        return K ** ((1 - gamma) / gamma) * u
    raise ValueError(f"which must be PRE or POST, got {which!r}")


def growth_factor_N(s, m: float, p: ModelParams, dc: DerivedConstants | None = None):
    """Measure-change growth factor N(s, m) of the reduced problem."""
    dc = dc or derive_constants(p, allow_override=True)
    g = p.gamma
    q = (g - 1) / g
    rate = -(p.beta - p.r) / g + q * (dc.mu1 - 0.5 * dc.sigma1**2) + 0.5 * q**2 * dc.sigma1**2
    s = np.asarray(s, dtype=float)
    return np.exp(rate * s - mortality_integral(m, s, p.a) / g)
