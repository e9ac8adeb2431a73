"""Free-boundary solver for the reduced stopping problem.

The boundary is computed on the reversed-time grid xi_j = j*h (xi = time to
mandatory retirement) by the recursive integration method: step k solves one
scalar equation, the trapezoid rule applied to the boundary integral
equation, against all previously computed boundary values.

The mortality rate entering the kernel at step k is the rate on the
deterministic Gompertz path at calendar date T - xi_k, so b_star[k]
approximates b(T - xi_k, M_{T - xi_k}).
"""

from __future__ import annotations

import dataclasses
import io
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import ndtr

from . import _pykernels
from .errors import (
    BracketNotFound,
    MortalityMismatch,
    NegativeValueBeyondTolerance,
    NonPositiveArgument,
    RootToleranceNotMet,
)
from .kernels import get_backend
from .model import (
    DerivedConstants,
    GammaRegime,
    ModelParams,
    derive_constants,
    expm1_ratio,
)

__all__ = [
    "BoundarySolution",
    "kernel_constants",
    "d_arguments",
    "g_kernel",
    "solve_boundary",
    "recompute_residuals",
    "j_hat",
]

MAX_BRACKET_DOUBLINGS = 20
GL_NODES = 24
_gl_t, _gl_w = np.polynomial.legendre.leggauss(GL_NODES)
_NODE_SNAP = 1e-9  # relative distance to a grid node treated as on-node


def kernel_constants(p: ModelParams, dc: DerivedConstants) -> tuple[float, ...]:
    """Scalars shared by both kernel backends.

    Returns (kappa, reward_coef, p, sigma1, c1, c2, mort, nu, gamma) where
    c1/c2 are the mortality-free log drifts in d1/d2, ``mort`` multiplies the
    integrated hazard in those drifts and ``nu`` is the growth rate of N.
    """
    g = p.gamma
    q = dc.p
    base = (dc.rho + 1) * (p.beta - p.r) + dc.mu1
    c1 = base - 0.5 * dc.sigma1**2
    c2 = base + (g - 2) * dc.sigma1**2 / (2 * g)
    nu = -(p.beta - p.r) / g + q * (dc.mu1 - 0.5 * dc.sigma1**2) + 0.5 * q**2 * dc.sigma1**2
    return (dc.kappa, dc.reward_coef, q, dc.sigma1, c1, c2, dc.rho + 1, nu, g)


def d_arguments(s, y, m: float, p: ModelParams, dc: DerivedConstants | None = None):
    """(d1, d2) for lag ``s`` > 0 and boundary ratio ``y``.

    The denominator carries the sign of sigma1, so Phi(d) is the probability
    of the event {X_s beyond the boundary} in both gamma regimes.
    """
    dc = dc or derive_constants(p, allow_override=True)
    _, _, _, sigma1, c1, c2, mort, _, _ = kernel_constants(p, dc)
    s = np.asarray(s, dtype=float)
    hazard = mort * m * expm1_ratio(p.a, s)
    lny = np.log(y)
    den = sigma1 * np.sqrt(s)
    return (lny - (c1 * s + hazard)) / den, (lny - (c2 * s + hazard)) / den


def g_kernel(xi: float, s, b_at_xi, b_at_xi_minus_s, m: float, p: ModelParams,
             dc: DerivedConstants | None = None):
    """Integrand G of the boundary equation.

    At ``s = 0`` the probabilities take the start-on-boundary value 1/2 when
    the two boundary arguments coincide and their one-sided limits otherwise.
    """
    dc = dc or derive_constants(p, allow_override=True)
    kappa, coef, q, sigma1, _, _, _, nu, g = kernel_constants(p, dc)
    s, bx, bs = np.broadcast_arrays(np.asarray(s, float), np.asarray(b_at_xi, float),
                                    np.asarray(b_at_xi_minus_s, float))
    if np.any(s < 0) or np.any(s > xi):
        raise ValueError("g_kernel requires 0 <= s <= xi")
    ratio = bs / bx
    pos = s > 0
    s_safe = np.where(pos, s, 1.0)
    d1, d2 = d_arguments(s_safe, ratio, m, p, dc)
    # s = 0: limit of Phi(ln ratio/(sigma1 sqrt(s))) as s -> 0
    lim = np.where(ratio == 1.0, 0.5, (np.sign(np.log(ratio)) * np.sign(sigma1) > 0) * 1.0)
    phi1 = np.where(pos, ndtr(d1), lim)
    phi2 = np.where(pos, ndtr(d2), lim)
    N = np.exp(nu * s - m * expm1_ratio(p.a, s) / g)
    out = np.exp(-kappa * s) * (coef * np.power(bx, q) * N * phi2 + phi1)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class BoundarySolution:
    """Solved boundary on the reversed-time grid.

    ``params.m0`` is the mortality rate at the evaluation date (xi = horizon);
    ``t_grid`` measures years from that date.
    """

    params: ModelParams
    n_steps: int
    root_tol: float
    xi_grid: np.ndarray
    b_star: np.ndarray
    residuals: np.ndarray
    regime: GammaRegime
    overridden: bool = False

    @property
    def m_initial(self) -> float:
        return self.params.m0

    @property
    def horizon(self) -> float:
        return self.params.T_horizon

    @property
    def h(self) -> float:
        return self.horizon / self.n_steps

    @property
    def t_grid(self) -> np.ndarray:
        return self.horizon - self.xi_grid

    @cached_property
    def constants(self) -> DerivedConstants:
        return derive_constants(self.params, allow_override=self.overridden)

    @cached_property
    def kernel_constants(self) -> tuple[float, ...]:
        return kernel_constants(self.params, self.constants)

    @cached_property
    def q_profile(self):
        from .post_retirement import QProfile
        return QProfile(self.params, constants=self.constants)

    def fingerprint(self) -> str:
        return self.params.fingerprint()

    def mortality_at_xi(self, xi) -> float:
        """Mortality on the deterministic path at calendar date T - xi."""
        return self.m_initial * np.exp(self.params.a * (self.horizon - np.asarray(xi, float)))

    def mortality_at_t(self, t) -> float:
        return self.m_initial * np.exp(self.params.a * np.asarray(t, float))

    def boundary_at(self, xi):
        """Linear interpolation of the boundary in xi."""
        return np.interp(xi, self.xi_grid, self.b_star)

    def in_continuation(self, xi: float, x):
        """True where x lies strictly on the continuation side of b(xi)."""
        b = self.boundary_at(xi)
        x = np.asarray(x, float)
        return x < b if self.regime is GammaRegime.HIGH else x > b

    def with_boundary(self, b_star: np.ndarray) -> "BoundarySolution":
        """Copy carrying a different (e.g. perturbed) boundary."""
        return dataclasses.replace(self, b_star=np.asarray(b_star, float).copy())

    # CSV ------------------------------------------------------------------------
    def to_csv_text(self) -> str:
        buf = io.StringIO(newline="")
        buf.write(f"# fingerprint={self.fingerprint()}\n")
        buf.write("# params=" + ";".join(f"{k}={v!r}" for k, v in self.params.to_mapping().items()) + "\n")
        buf.write(f"# solver=n_steps={self.n_steps};root_tol={self.root_tol!r};"
                  f"regime={self.regime.value};assumptions_overridden={str(self.overridden).lower()}\n")
        buf.write("xi,t,b_star,residual\n")
        for xi, t, b, r in zip(self.xi_grid, self.t_grid, self.b_star, self.residuals):
            buf.write(f"{float(xi)!r},{float(t)!r},{float(b)!r},{float(r)!r}\n")
        return buf.getvalue()

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv_text())

    @classmethod
    def from_csv_text(cls, text: str) -> "BoundarySolution":
        meta: dict[str, str] = {}
        rows = []
        header = None
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key] = val
            elif header is None:
                header = line.split(",")
            elif line:
                rows.append([float(v) for v in line.split(",")])
        if header != ["xi", "t", "b_star", "residual"]:
            raise ValueError(f"unexpected boundary CSV header {header!r}")
        params = ModelParams.from_mapping(dict(kv.split("=", 1) for kv in meta["params"].split(";")))
        solver = dict(kv.split("=", 1) for kv in meta["solver"].split(";"))
        data = np.array(rows)
        sol = cls(params=params, n_steps=int(solver["n_steps"]), root_tol=float(solver["root_tol"]),
                  xi_grid=data[:, 0], b_star=data[:, 2], residuals=data[:, 3],
                  regime=GammaRegime(solver["regime"]),
                  overridden=solver["assumptions_overridden"] == "true")
        if sol.fingerprint() != meta.get("fingerprint"):
            raise ValueError("fingerprint does not match the embedded parameters")
        return sol

    @classmethod
    def from_csv(cls, path) -> "BoundarySolution":
        with open(path, newline="") as fh:
            return cls.from_csv_text(fh.read())


def _lag_tables(p: ModelParams, n: int):
    h = p.T_horizon / n
    xi = h * np.arange(n + 1)
    return h, xi, xi.copy(), expm1_ratio(p.a, xi)


def solve_boundary(p: ModelParams, m: float | None = None, n_steps: int = 200,
                   root_tol: float = 1e-8, allow_override: bool = False,
                   backend: str | None = None) -> BoundarySolution:
    """Solve for b* on ``n_steps`` reversed-time subintervals.

    Parameters
    ----------
    p : ModelParams
    m : float, optional
        Mortality at the evaluation date; defaults to ``p.m0``.
    n_steps : int
        Number of subintervals of [0, T_horizon]; at least 2.
    root_tol : float
        Bisection stops once the bracket is at most this wide and the step
        residual is at most this large.
    backend : {"python", "compiled"}, optional
        Kernel implementation; defaults to the import-time selection.
    """
    if n_steps < 2:
        raise ValueError("n_steps must be >= 2")
    if m is not None:
        p = p.replace(m0=float(m))
    dc = derive_constants(p, allow_override=allow_override)
    kc = kernel_constants(p, dc)
    h, xi, lag_s, lag_e = _lag_tables(p, n_steps)
    m_path = p.m0 * np.exp(p.a * (p.T_horizon - xi))
    b = np.empty(n_steps + 1)
    res = np.empty(n_steps + 1)
    info = np.zeros(5)
    status = get_backend(backend).solve_recursion(
        dc.L_terminal, h, lag_s, lag_e, m_path, kc, root_tol, MAX_BRACKET_DOUBLINGS,
        dc.gamma_regime is GammaRegime.HIGH, b, res, info)
    info = [float(v) for v in info]
    if status == _pykernels.STATUS_NO_BRACKET:
        raise BracketNotFound(
            f"residual did not change sign at step {int(info[0])} within bracket "
            f"[{info[1]!r}, {info[2]!r}] (residuals {info[3]!r}, {info[4]!r})",
            bracket=(info[1], info[2]), residuals=(info[3], info[4]), step=int(info[0]))
    if status == _pykernels.STATUS_TOL_NOT_MET:
        raise RootToleranceNotMet(
            f"bisection at step {int(info[0])} stalled at bracket [{info[1]!r}, {info[2]!r}] "
            f"with residuals {info[3]!r}, {info[4]!r}")
    return BoundarySolution(params=p, n_steps=n_steps, root_tol=root_tol, xi_grid=xi,
                            b_star=b, residuals=res, regime=dc.gamma_regime,
                            overridden=dc.overridden)


def recompute_residuals(sol: BoundarySolution) -> np.ndarray:
    """Plug the stored boundary back into the discretised equation (numpy path)."""
    kc = sol.kernel_constants
    coef, q = kc[1], kc[2]
    n, h = sol.n_steps, sol.h
    lnb = np.log(sol.b_star)
    lag_e = expm1_ratio(sol.params.a, sol.xi_grid)
    out = np.zeros(n + 1)
    for k in range(1, n + 1):
        w = np.full(k, h)
        w[0] = 0.5 * h
        lags = slice(k, 0, -1)
        terms = _pykernels.build_terms(sol.xi_grid[lags], lag_e[lags], lnb[:k], w,
                                       float(sol.mortality_at_xi(sol.xi_grid[k])), kc)
        x = sol.b_star[k]
        out[k] = (_pykernels.weighted_sum(lnb[k], *terms, q)[0]
                  + 0.25 * h * (coef * x**q + 1.0))
    return out


def _value_terms(sol: BoundarySolution, xi: float, m: float):
    """Quadrature terms for the value integral at reversed time ``xi``.

    The first panel [0, s1] is integrated by Gauss-Legendre in sqrt(s), which
    resolves the sqrt(s) boundary layer of the hitting probabilities; the
    rest of [s1, xi] uses the trapezoid rule on the boundary's own nodes.
    """
    h = sol.h
    pos = xi / h
    k_near = round(pos)
    if abs(pos - k_near) <= _NODE_SNAP * max(1.0, pos):
        pos = float(k_near)
    kp = math.floor(pos - 1.0) if pos >= 1.0 else -1  # last node with xi_j <= xi - h
    s1 = xi - sol.xi_grid[kp] if kp >= 0 else xi

    v = 0.5 * math.sqrt(s1) * (_gl_t + 1.0)
    S = [v * v]
    W = [0.5 * math.sqrt(s1) * _gl_w * 2.0 * v]
    B = [np.interp(xi - v * v, sol.xi_grid, sol.b_star)]
    if kp >= 1:
        idx = np.arange(kp, -1, -1)
        w = np.full(kp + 1, h)
        w[0] = w[-1] = 0.5 * h
        S.append(xi - sol.xi_grid[idx])
        W.append(w)
        B.append(sol.b_star[idx])
    S = np.concatenate(S)
    return _pykernels.build_terms(S, expm1_ratio(sol.params.a, S), np.log(np.concatenate(B)),
                                  np.concatenate(W), m, sol.kernel_constants)


def _check_mortality(sol: BoundarySolution, xi: float, m: float | None) -> float:
    on_path = float(sol.mortality_at_xi(xi))
    if m is not None and not math.isclose(m, on_path, rel_tol=1e-9):
        raise MortalityMismatch(
            f"mortality {m!r} is not on the solved path (expected {on_path!r} at xi={xi!r})")
    return on_path


def j_hat(xi: float, x, m: float | None, sol: BoundarySolution, backend: str | None = None):
    """Approximate value of the reduced stopping problem.

    Returns 0 on the stopping side of the boundary and the quadrature of the
    boundary integral representation on the continuation side.  ``m`` must
    be the mortality on the solved path at date T - xi (pass ``None`` to
    take it from the solution).
    """
    xi = float(xi)
    if not -1e-12 <= xi <= sol.horizon * (1 + 1e-12):
        raise ValueError(f"xi={xi!r} outside [0, {sol.horizon!r}]")
    xi = min(max(xi, 0.0), sol.horizon)
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0):
        raise NonPositiveArgument("j_hat requires x > 0")
    m_here = _check_mortality(sol, xi, m)
    out = np.zeros(x_arr.shape)
    if xi == 0.0:
        return out[()] if out.ndim == 0 else out
    cont = sol.in_continuation(xi, x_arr)
    if np.any(cont):
        terms = _value_terms(sol, xi, m_here)
        vals = get_backend(backend).weighted_sum(np.log(x_arr[cont]), *terms, sol.kernel_constants[2])
        floor = -10.0 * sol.root_tol
        if np.any(vals < floor):
            raise NegativeValueBeyondTolerance(
                f"value {vals.min()!r} below -{10 * sol.root_tol!r} at xi={xi!r}")
        out[cont] = np.maximum(vals, 0.0)
    return out[()] if out.ndim == 0 else out
