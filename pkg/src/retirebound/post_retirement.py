"""Post-retirement dual value and its primal counterpart.

After retirement the dual value is separable, Q(x, m) = x^{(g-1)/g} C(m),
where C(m) is a scalar integral over the remaining (Gompertz-discounted)
lifetime.  C is the single expensive primitive, so it is memoised per m.
"""

from __future__ import annotations

import math
import threading

import numpy as np
from scipy import integrate

from .errors import NonPositiveArgument, NonPositiveWealth, QuadratureNotConverged
from .model import DerivedConstants, ModelParams, derive_constants, expm1_ratio

__all__ = [
    "QProfile",
    "c_integral",
    "q_reduced",
    "q_reduced_x",
    "q_reduced_xx",
    "post_retirement_value",
    "post_retirement_consumption",
]

_MAX_DOUBLINGS = 60


class QProfile:
    """Memoised map m -> C(m) for one parameter set.

    Parameters
    ----------
    params : ModelParams
    quadrature_tol : float
        Relative error target for I(m).
    constants : DerivedConstants, optional
        Pass to skip re-validation (e.g. for overridden runs).

    The cache is keyed on the exact float ``m`` and guarded by a lock, so a
    profile can be shared between threads.
    """

    def __init__(self, params: ModelParams, quadrature_tol: float = 1e-10,
                 constants: DerivedConstants | None = None):
        self.params = params
        self.quadrature_tol = quadrature_tol
        self.constants = constants or derive_constants(params)
        g = params.gamma
        th = self.constants.theta
        # exponential decay rate of the integrand before mortality kicks in
        self.decay_rate = (params.beta / g + (g - 1) / g * (params.r + 0.5 * th**2)
                           - (g - 1) ** 2 * th**2 / (2 * g**2))
        self._cache: dict[float, float] = {}
        self._lock = threading.Lock()

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_lock"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()

    # integrand and tail control -------------------------------------------------
    def integrand(self, s, m: float):
        g = self.params.gamma
        return np.exp(-self.decay_rate * s - m / g * expm1_ratio(self.params.a, s))

    def tail_bound(self, S: float, m: float) -> float:
        """Upper bound on the integral over [S, inf).

        Convexity of e^{as} gives e^{as} - 1 >= (e^{aS} - 1) + a e^{aS}(s - S),
        so the tail is dominated by an exponential starting at f(S).
        """
        rate = self.decay_rate + m * math.exp(self.params.a * S) / self.params.gamma
        if rate <= 0:
            return math.inf
        return float(self.integrand(S, m)) / rate

    def truncation_horizon(self, m: float) -> float:
        """Smallest power-of-two horizon whose tail bound is negligible."""
        floor = float(self.integrand(1.0, m))  # I(m) >= f(1) since f decreases
        S = 1.0
        for _ in range(_MAX_DOUBLINGS):
            if self.tail_bound(S, m) <= 1e-3 * self.quadrature_tol * floor:
                return S
            S *= 2.0
        raise QuadratureNotConverged(f"no finite truncation horizon for m={m!r}")

    def integral(self, m: float) -> float:
        """I(m) with relative error at most ``quadrature_tol``."""
        if not m > 0:
            raise NonPositiveArgument(f"mortality must be > 0, got {m!r}")
        S = self.truncation_horizon(m)
        val, abserr = integrate.quad(self.integrand, 0.0, S, args=(m,), epsabs=0.0,
                                     epsrel=0.25 * self.quadrature_tol, limit=500)
        budget = abserr + self.tail_bound(S, m)
        if not budget <= self.quadrature_tol * val:
            raise QuadratureNotConverged(
                f"I({m!r}) error budget {budget:.3e} exceeds tol*I = {self.quadrature_tol * val:.3e}")
        return val

    def c_of_m(self, m: float) -> float:
        """C(m) = g/(1-g) K^{(1-g)/g} I(m)."""
        m = float(m)
        with self._lock:
            hit = self._cache.get(m)
        if hit is not None:
            return hit
        g = self.params.gamma
        c = g / (1 - g) * self.constants.k_factor * self.integral(m)
        with self._lock:
            self._cache[m] = c
        return c


def c_integral(params: ModelParams, m: float, tol: float = 1e-10) -> float:
    """Uncached C(m)."""
    return QProfile(params, tol, derive_constants(params, allow_override=True)).c_of_m(m)


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise NonPositiveArgument("Q requires x > 0")
    return x


def q_reduced(x, m: float, profile: QProfile):
    g = profile.params.gamma
    return np.power(_check_x(x), (g - 1) / g) * profile.c_of_m(m)


def q_reduced_x(x, m: float, profile: QProfile):
    g = profile.params.gamma
    return (g - 1) / g * np.power(_check_x(x), -1 / g) * profile.c_of_m(m)


def q_reduced_xx(x, m: float, profile: QProfile):
    g = profile.params.gamma
    return -(g - 1) / g**2 * np.power(_check_x(x), -1 / g - 1) * profile.c_of_m(m)


def post_retirement_value(w: float, m: float, profile: QProfile) -> tuple[float, float]:
    """Retired agent's value V(w, m) and the dual minimiser z.

    The minimiser of Q(z) + z w is available in closed form because Q is a
    power of z; the value then reduces to z w/(1 - g).
    """
    if not w > 0:
        raise NonPositiveWealth(f"wealth must be > 0, got {w!r}")
    g = profile.params.gamma
    pc = (g - 1) / g * profile.c_of_m(m)
    z = (-w / pc) ** (-g)
    return z * w / (1 - g), z


def post_retirement_consumption(w: float, m: float, profile: QProfile) -> float:
    """Optimal consumption rate right after retiring with wealth ``w``."""
    _, z = post_retirement_value(w, m, profile)
    g = profile.params.gamma
    return profile.constants.k_factor * z ** (-1 / g)
