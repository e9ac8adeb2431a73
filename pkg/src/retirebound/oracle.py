"""Independent checks of the integral-equation solution.

* :func:`lattice_solve` runs backward induction for the reduced stopping
  problem on a log-x grid with a Gauss-Hermite expectation stencil.
* :func:`mc_evaluate` simulates the reduced state exactly on the boundary's
  own time grid and averages the discounted running reward collected until
  the state first crosses a given boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .boundary import BoundarySolution, kernel_constants
from .csvio import table_text
from .errors import GridTooCoarse
from .model import GammaRegime, ModelParams, derive_constants, expm1_ratio

__all__ = [
    "LatticeSpec",
    "OracleReport",
    "lattice_solve",
    "mc_evaluate",
    "MCResult",
]

MC_BATCH = 25_000


@dataclass(frozen=True)
class LatticeSpec:
    n_time: int
    n_space: int
    x_lo: float
    x_hi: float
    m_initial: float
    stencil: int = 7

    def __post_init__(self):
        if self.n_time < 16 or self.n_space < 16:
            raise ValueError("lattice needs n_time, n_space >= 16")
        if not 0 < self.x_lo < self.x_hi:
            raise ValueError("lattice range must satisfy 0 < x_lo < x_hi")
        if self.stencil < 7:
            raise ValueError("stencil must have at least 7 points")

    @classmethod
    def covering(cls, sol: BoundarySolution, n_time: int = 500, n_space: int = 800,
                 stencil: int = 7) -> "LatticeSpec":
        """Range [L/4, 4 max b*] (mirrored to [min b*/4, 4 L] when gamma < 1)."""
        L = sol.constants.L_terminal
        if sol.regime is GammaRegime.HIGH:
            lo, hi = L / 4, 4 * float(sol.b_star.max())
        else:
            lo, hi = float(sol.b_star.min()) / 4, 4 * L
        return cls(n_time, n_space, lo, hi, sol.m_initial, stencil)


@dataclass
class OracleReport:
    """Lattice boundary/value and optional Monte-Carlo values.

    ``t_grid``/``xi_grid`` index the lattice time slices; ``boundary_lattice``
    holds the zero-level x per slice (the terminal slice carries L).
    """

    t_grid: np.ndarray
    xi_grid: np.ndarray
    x_grid: np.ndarray
    boundary_lattice: np.ndarray
    value_grid: np.ndarray
    fingerprint: str
    mc_rows: list = field(default_factory=list)
    overridden: bool = False

    def boundary_at_xi(self, xi: float) -> float:
        return float(np.interp(xi, self.xi_grid[::-1], self.boundary_lattice[::-1]))

    def _meta(self):
        meta = {"fingerprint": self.fingerprint}
        if self.overridden:
            meta["assumptions_overridden"] = True
        return meta

    def to_csv_text(self, sol: BoundarySolution | None = None) -> str:
        """Per-slice boundary table, optionally diffed against ``sol``."""
        cols = ["t", "xi", "b_lattice"] + (["b_integral", "rel_gap"] if sol is not None else [])
        rows = []
        for t, xi, b in zip(self.t_grid, self.xi_grid, self.boundary_lattice):
            row = {"t": t, "xi": xi, "b_lattice": b}
            if sol is not None:
                bi = float(sol.boundary_at(xi))
                row.update(b_integral=bi, rel_gap=(b - bi) / bi)
            rows.append(row)
        return table_text(cols, rows, self._meta())

    def mc_csv_text(self) -> str:
        cols = ["xi", "x", "j_hat", "mc_mean", "mc_stderr", "z_score"]
        return table_text(cols, self.mc_rows, self._meta())


def _zero_crossing(lnx: np.ndarray, C: np.ndarray, high: bool) -> float:
    """Log-linear interpolated location where continuation value changes sign."""
    pos = C > 0
    if high:
        idx = np.nonzero(pos[:-1] & ~pos[1:])[0]
    else:
        idx = np.nonzero(~pos[:-1] & pos[1:])[0]
    if idx.size == 0:
        raise GridTooCoarse("continuation value does not change sign inside the lattice range")
    i = idx[-1] if high else idx[0]
    if i == 0 or i + 1 == len(C) - 1:
        raise GridTooCoarse("boundary reached the edge of the lattice range")
    frac = C[i] / (C[i] - C[i + 1])
    return float(np.exp(lnx[i] + frac * (lnx[i + 1] - lnx[i])))


def lattice_solve(p: ModelParams, spec: LatticeSpec, allow_override: bool = False) -> OracleReport:
    """Backward induction for the reduced problem on a log-x lattice."""
    dc = derive_constants(p, allow_override=allow_override)
    kappa, coef, q, sigma1, c1, _, mort, _, _ = kernel_constants(p, dc)
    high = dc.gamma_regime is GammaRegime.HIGH
    nodes, weights = np.polynomial.hermite_e.hermegauss(spec.stencil)
    weights = weights / weights.sum()

    lnx = np.linspace(np.log(spec.x_lo), np.log(spec.x_hi), spec.n_space)
    x = np.exp(lnx)
    T = p.T_horizon
    dt = T / spec.n_time
    reward = coef * x**q + 1.0
    disc = np.exp(-kappa * dt)
    shocks = sigma1 * np.sqrt(dt) * nodes

    V = np.zeros(spec.n_space)
    values = np.empty((spec.n_time + 1, spec.n_space))
    values[-1] = V
    bnd = np.empty(spec.n_time + 1)
    bnd[-1] = dc.L_terminal
    for i in range(spec.n_time - 1, -1, -1):
        m_i = spec.m_initial * np.exp(p.a * i * dt)
        drift = c1 * dt + mort * m_i * float(expm1_ratio(p.a, dt))
        EV = np.zeros(spec.n_space)
        for z, w in zip(shocks, weights):
            EV += w * np.interp(lnx + drift + z, lnx, V)
        C = dt * reward + disc * EV
        V = np.maximum(C, 0.0)
        values[i] = V
        bnd[i] = _zero_crossing(lnx, C, high)
    t_grid = dt * np.arange(spec.n_time + 1)
    return OracleReport(t_grid=t_grid, xi_grid=T - t_grid, x_grid=x, boundary_lattice=bnd,
                        value_grid=values, fingerprint=p.replace(m0=spec.m_initial).fingerprint(),
                        overridden=dc.overridden)


@dataclass(frozen=True)
class MCResult:
    mean: float
    stderr: float
    n_paths: int

    def __iter__(self):
        return iter((self.mean, self.stderr))


def _mc_batch(rng, n, x0, k, sol, kc, bridge):
    """One batch of paths started at node k; returns per-path rewards."""
    kappa, coef, q, sigma1, c1, _, mort, _, _ = kc
    high = sol.regime is GammaRegime.HIGH
    h = sol.h
    b = sol.b_star
    a = sol.params.a
    step_hazard = float(expm1_ratio(a, h))
    m_start = float(sol.mortality_at_xi(sol.xi_grid[k]))
    vol = sigma1 * np.sqrt(h)

    def inside(xv, bv):
        return xv < bv if high else xv > bv

    X = np.full(n, x0)
    alive = inside(X, b[k])
    total = np.zeros(n)
    R0 = coef * X**q + 1.0
    for i in range(k):
        s = i * h
        m_s = m_start * np.exp(a * s)
        Xn = X * np.exp(c1 * h + mort * m_s * step_hazard + vol * rng.standard_normal(n))
        U = rng.random(n)
        bn = b[k - i - 1]
        still = inside(Xn, bn)
        if bridge:
            # probability that the log-path touched the (log-linear) boundary in between
            with np.errstate(over="ignore"):
                hit = np.exp(-2.0 * np.log(b[k - i] / X) * np.log(bn / Xn) / (sigma1**2 * h))
            still &= U >= hit
        Rn = coef * Xn**q + 1.0
        full = alive & still
        part = alive & ~still
        ds = np.exp(-kappa * s)
        total += full * ds * 0.5 * (R0 + np.exp(-kappa * h) * Rn) * h
        total += part * ds * 0.5 * R0 * h
        alive = full
        X, R0 = Xn, Rn
    return total


def mc_evaluate(p: ModelParams, boundary: BoundarySolution, start, n_paths: int = 100_000,
                seed: int = 0, bridge: bool = True) -> MCResult:
    """Mean and standard error of the reward collected under ``boundary``.

    Parameters
    ----------
    start : (x, xi) or (x, xi, m)
        Reduced state and reversed time (a grid node of ``boundary``); the
        optional mortality must sit on the boundary's mortality path.
    bridge : bool
        Also stop paths that cross between grid dates, with the Brownian
        bridge crossing probability against the log-linear boundary.
    """
    if n_paths < 1000:
        raise ValueError("n_paths must be >= 1000")
    x0, xi = float(start[0]), float(start[1])
    k = int(round(xi / boundary.h))
    if abs(k * boundary.h - xi) > 1e-9 * max(1.0, xi):
        raise ValueError("mc_evaluate starts on a node of the boundary grid")
    if len(start) > 2:
        from .boundary import _check_mortality
        _check_mortality(boundary, xi, float(start[2]))
    kc = kernel_constants(p, derive_constants(p, allow_override=True))
    sizes = [MC_BATCH] * (n_paths // MC_BATCH) + ([n_paths % MC_BATCH] if n_paths % MC_BATCH else [])
    streams = np.random.SeedSequence(seed).spawn(len(sizes))
    vals = np.concatenate([_mc_batch(np.random.default_rng(ss), n, x0, k, boundary, kc, bridge)
                           for ss, n in zip(streams, sizes)])
    return MCResult(float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(n_paths)), n_paths)
