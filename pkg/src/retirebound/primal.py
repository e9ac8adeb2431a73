"""Primal quantities recovered from the dual solution.

The full dual value is J(t, z, m, y) = z y Jt(t, x, m) with the reduced
variable x = z^{1/(1-g)} y^{g/(1-g)} and Jt = Jhat + Q - q(t).  Wealth is
recovered from the multiplier through w = -J_z - q(t) y; inverting that
relation gives z*, from which consumption, the risky position and the
primal value follow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .boundary import BoundarySolution, _check_mortality, j_hat
from .csvio import parse_table, table_text
from .errors import BracketNotFound, InadmissibleWealth, NonPositiveArgument
from .model import GammaRegime, q_factor
from .post_retirement import (
    post_retirement_consumption,
    post_retirement_value,
    q_reduced,
    q_reduced_x,
    q_reduced_xx,
)

__all__ = [
    "PrimalState",
    "PolicyOutput",
    "j_tilde",
    "dual_value_J",
    "dual_value_derivatives",
    "invert_multiplier",
    "wealth_from_multiplier",
    "wealth_boundary",
    "wealth_to_wage_ratio",
    "feedback_policies",
    "primal_value",
    "retired_value",
    "policy_sweep",
    "POLICY_COLUMNS",
    "policy_csv_text",
    "parse_policy_csv",
]

FD_REL_STEP = 1e-4
Z_REL_TOL = 1e-10
MAX_BRACKET_EXPANSIONS = 60


@dataclass(frozen=True)
class PrimalState:
    """Evaluation point in economic coordinates (t in years from the evaluation date)."""

    t: float
    w: float
    m: float
    y: float

    def __post_init__(self):
        if not self.y > 0:
            raise NonPositiveArgument(f"labour income must be > 0, got {self.y!r}")

    @classmethod
    def on_path(cls, sol: BoundarySolution, t: float, w: float, y: float) -> "PrimalState":
        """State whose mortality is the solved path's rate at ``t``."""
        return cls(t=t, w=w, m=float(sol.mortality_at_t(t)), y=y)


@dataclass(frozen=True)
class PolicyOutput:
    z_star: float
    c_star: float
    pi_star: float
    retire_now: bool
    b_hat: float
    # "working" when the pre-retirement maps apply, "retired" when the state is
    # already in the retirement region and c*, pi* come from the retired problem
    regime: str = "working"


def _xi_of(sol: BoundarySolution, t: float) -> float:
    if not -1e-12 <= t <= sol.horizon * (1 + 1e-12):
        raise ValueError(f"t={t!r} outside [0, {sol.horizon!r}]")
    return min(max(sol.horizon - t, 0.0), sol.horizon)


def _j_hat_derivatives(sol: BoundarySolution, xi: float, x: float, m: float):
    """Jhat and its first two x-derivatives by finite differences.

    Stencils never straddle the boundary: a central stencil is used when it
    fits on the continuation side, otherwise a one-sided stencil reaching
    back into the continuation region.  On the stopping side everything is 0.
    """
    if xi == 0.0 or not sol.in_continuation(xi, x):
        return 0.0, 0.0, 0.0
    h = FD_REL_STEP * x
    high = sol.regime is GammaRegime.HIGH
    outward = 1.0 if high else -1.0  # direction towards the boundary
    if bool(sol.in_continuation(xi, x + outward * h)):
        f = j_hat(xi, np.array([x - h, x, x + h]), m, sol)
        d1 = (f[2] - f[0]) / (2 * h)
        d2 = (f[2] - 2 * f[1] + f[0]) / h**2
        return float(f[1]), float(d1), float(d2)
    # one-sided, pointing back into the continuation region
    e = -outward * h
    f = j_hat(xi, x + e * np.arange(4), m, sol)
    d1 = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * e)
    d2 = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / e**2
    return float(f[0]), float(d1), float(d2)


def j_tilde(t: float, x: float, m: float | None, sol: BoundarySolution):
    """(Jt, Jt_x, Jt_xx) of the reduced dual value at date ``t``."""
    if not x > 0:
        raise NonPositiveArgument(f"x must be > 0, got {x!r}")
    xi = _xi_of(sol, t)
    m = _check_mortality(sol, xi, m)
    jh, jx, jxx = _j_hat_derivatives(sol, xi, float(x), m)
    prof = sol.q_profile
    q = float(q_factor(t, sol.horizon, sol.constants.kappa))
    return (jh + float(q_reduced(x, m, prof)) - q,
            jx + float(q_reduced_x(x, m, prof)),
            jxx + float(q_reduced_xx(x, m, prof)))


def _reduced_x(z: float, y: float, gamma: float) -> float:
    return math.exp((math.log(z) + gamma * math.log(y)) / (1 - gamma))


def dual_value_derivatives(t: float, z: float, m: float | None, y: float, sol: BoundarySolution):
    """(J, J_z, J_zz, J_zy) at one point."""
    if not (z > 0 and y > 0):
        raise NonPositiveArgument("dual value requires z > 0 and y > 0")
    g = sol.params.gamma
    x = _reduced_x(z, y, g)
    jt, jx, jxx = j_tilde(t, x, m, sol)
    J = z * y * jt
    J_z = y * (jt + x * jx / (1 - g))
    J_zz = x * y / z * ((2 - g) * jx + x * jxx) / (1 - g) ** 2
    J_zy = jt + x * (g - g * g + 1) / (1 - g) ** 2 * jx + x * x * g / (1 - g) ** 2 * jxx
    return J, J_z, J_zz, J_zy


def dual_value_J(t: float, z: float, m: float | None, y: float, sol: BoundarySolution):
    """Full dual value J and its z-derivative."""
    if not (z > 0 and y > 0):
        raise NonPositiveArgument("dual value requires z > 0 and y > 0")
    g = sol.params.gamma
    x = _reduced_x(z, y, g)
    jt, jx, _ = j_tilde(t, x, m, sol)
    return z * y * jt, y * (jt + x * jx / (1 - g))


def wealth_from_multiplier(t: float, z: float, m: float | None, y: float, sol: BoundarySolution) -> float:
    """w(z) = -J_z - q(t) y, the wealth level whose multiplier is ``z``."""
    _, J_z = dual_value_J(t, z, m, y, sol)
    return -J_z - float(q_factor(t, sol.horizon, sol.constants.kappa)) * y


def invert_multiplier(t: float, w: float, m: float | None, y: float, sol: BoundarySolution) -> float:
    """Unique z* with J_z(z*) = -(w + q(t) y), by bisection on ln z."""
    g_t = float(q_factor(t, sol.horizon, sol.constants.kappa)) * y
    if not w + g_t > 0:
        raise InadmissibleWealth(f"wealth {w!r} must exceed minus human capital {-g_t!r}")
    target = w + g_t

    def phi(lz):
        return dual_value_J(t, math.exp(lz), m, y, sol)[1] + target

    # start at the multiplier that puts x on the boundary
    gam = sol.params.gamma
    b = float(sol.boundary_at(_xi_of(sol, t)))
    center = (1 - gam) * math.log(b) - gam * math.log(y)
    width = 1.0
    lo, hi = center - width, center + width
    f_lo, f_hi = phi(lo), phi(hi)
    for _ in range(MAX_BRACKET_EXPANSIONS):
        if f_lo <= 0 <= f_hi:
            break
        width *= 2
        if f_lo > 0:
            lo = center - width
            f_lo = phi(lo)
        if f_hi < 0:
            hi = center + width
            f_hi = phi(hi)
    else:
        raise BracketNotFound(f"no multiplier bracket for w={w!r}", bracket=(lo, hi),
                              residuals=(f_lo, f_hi))
    while hi - lo > Z_REL_TOL:
        mid = 0.5 * (lo + hi)
        if phi(mid) < 0:
            lo = mid
        else:
            hi = mid
    return math.exp(0.5 * (lo + hi))


def wealth_boundary(t: float, m: float | None, y: float, sol: BoundarySolution) -> float:
    """Retirement wealth threshold b_hat(t, m, y) in currency."""
    xi = _xi_of(sol, t)
    m = _check_mortality(sol, xi, m)
    b = float(sol.boundary_at(xi))
    g = sol.params.gamma
    prof = sol.q_profile
    return float(-y * q_reduced(b, m, prof) - b * y / (1 - g) * q_reduced_x(b, m, prof))


def wealth_to_wage_ratio(t: float, m: float | None, sol: BoundarySolution) -> float:
    """Critical wealth-to-income ratio above which retiring is optimal."""
    return wealth_boundary(t, m, 1.0, sol)


def feedback_policies(state: PrimalState, sol: BoundarySolution) -> PolicyOutput:
    """Optimal consumption, risky position and retirement decision at ``state``."""
    t, w, m, y = state.t, state.w, state.m, state.y
    g = sol.params.gamma
    p = sol.params
    theta = sol.constants.theta
    b_hat = wealth_boundary(t, m, y, sol)
    z = invert_multiplier(t, w, m, y, sol)
    if w >= b_hat:
        c = post_retirement_consumption(w, m, sol.q_profile)
        pi = theta / (p.sigma * g) * w
        return PolicyOutput(z, c, pi, True, b_hat, "retired")
    q = float(q_factor(t, sol.horizon, sol.constants.kappa))
    _, _, J_zz, J_zy = dual_value_derivatives(t, z, m, y, sol)
    pi = theta / p.sigma * z * J_zz - p.sigma_y * y * (q + J_zy)
    return PolicyOutput(z, z ** (-1 / g), pi, False, b_hat, "working")


def primal_value(state: PrimalState, sol: BoundarySolution, z_star: float | None = None) -> float:
    """V(t, w, m, y) = J(z*) + z*(w + q(t) y)."""
    t, w, m, y = state.t, state.w, state.m, state.y
    z = invert_multiplier(t, w, m, y, sol) if z_star is None else z_star
    J, _ = dual_value_J(t, z, m, y, sol)
    return J + z * (w + float(q_factor(t, sol.horizon, sol.constants.kappa)) * y)


def retired_value(w: float, m: float, sol: BoundarySolution) -> float:
    return post_retirement_value(w, m, sol.q_profile)[0]


# policy sweeps ------------------------------------------------------------------

POLICY_COLUMNS = ("t", "w", "m", "y", "z_star", "c_star", "pi_star", "b_hat", "retire_now", "V",
                  "pi_share")


def policy_sweep(sol: BoundarySolution, t: float, y: float, wealth) -> list[dict]:
    """Policies and value along a wealth grid at fixed (t, y)."""
    rows = []
    for w in np.asarray(wealth, float):
        st = PrimalState.on_path(sol, t, float(w), y)
        pol = feedback_policies(st, sol)
        rows.append({"t": st.t, "w": st.w, "m": st.m, "y": st.y, "z_star": pol.z_star,
                     "c_star": pol.c_star, "pi_star": pol.pi_star, "b_hat": pol.b_hat,
                     "retire_now": pol.retire_now,
                     "V": primal_value(st, sol, z_star=pol.z_star),
                     # share of wealth in stock, defined only for positive wealth
                     "pi_share": pol.pi_star / st.w if st.w > 0 else None})
    return rows


def policy_csv_text(rows: list[dict], fingerprint: str, overridden: bool = False) -> str:
    meta = {"fingerprint": fingerprint}
    if overridden:
        meta["assumptions_overridden"] = True
    return table_text(POLICY_COLUMNS, rows, meta)


def parse_policy_csv(text: str) -> tuple[dict[str, str], list[dict]]:
    """Inverse of :func:`policy_csv_text`: (metadata, rows)."""
    meta, _, rows = parse_table(text)
    return meta, rows
