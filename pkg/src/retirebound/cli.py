"""Command line front end.

    retirebound {validate|boundary|primal|oracle|sweep} [--config PATH] [--out DIR]
                [--seed N] [--allow-assumption-override]

Configs are TOML files holding the model parameters at top level plus
``solver.*``, ``sweep.*``, ``primal.*``, ``oracle.*``, ``outputs.*`` and
``mortality.*`` keys.  Every CSV written embeds the parameter fingerprint.

Exit status: 0 success, 1 an invariant or oracle agreement check failed,
2 configuration or assumption error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .boundary import BoundarySolution, j_hat, solve_boundary
from .csvio import table_text, write_text
from .errors import AssumptionViolated, ConfigParse, RetirementModelError
from .model import GammaRegime, ModelParams, check_assumptions, derive_constants, initial_mortality
from .oracle import LatticeSpec, lattice_solve, mc_evaluate
from .primal import policy_csv_text, policy_sweep, wealth_boundary

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
STATE_AXES = ("m", "y", "w", "t")


@dataclass(frozen=True)
class SolverSettings:
    n_steps: int = 200
    root_tol: float = 1e-8


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple[float, ...]
    workers: int | None = None


@dataclass(frozen=True)
class PrimalSettings:
    t: float = 0.0
    y: float = 1.0
    w_values: tuple[float, ...] | None = None  # default: grid around b_hat
    n_w: int = 41


@dataclass(frozen=True)
class OracleSettings:
    n_time: int = 500
    n_space: int = 800
    stencil: int = 7
    x_lo: float | None = None
    x_hi: float | None = None
    compare_xi: tuple[float, ...] = (2.5, 5.0, 10.0)
    max_rel_gap: float = 0.02
    mc_paths: int = 100_000
    mc_states: tuple[tuple[float, float], ...] | None = None  # (xi, x/b(xi)) pairs
    max_z: float = 3.0


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams = field(default_factory=ModelParams)
    solver: SolverSettings = field(default_factory=SolverSettings)
    sweep: SweepSpec | None = None
    primal: PrimalSettings = field(default_factory=PrimalSettings)
    oracle: OracleSettings = field(default_factory=OracleSettings)
    outputs: str = "out"
    seed: int = 0


def _section(cls, data: dict, name: str):
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigParse(f"unknown keys in [{name}]: {sorted(unknown)}")
    out = {}
    for k, v in data.items():
        if isinstance(v, list):
            v = tuple(tuple(e) if isinstance(e, list) else e for e in v)
        out[k] = v
    try:
        return cls(**out)
    except (TypeError, ValueError) as exc:
        raise ConfigParse(f"invalid [{name}] section: {exc}") from exc


def parse_config(text: str) -> RunConfig:
    """Build a :class:`RunConfig` from TOML text; unknown keys are errors."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigParse(f"not valid TOML: {exc}") from exc
    sections = {k: data.pop(k) for k in list(data) if isinstance(data[k], dict)}
    seed = data.pop("seed", 0)
    fields = set(ModelParams.field_names())
    unknown = set(data) - fields
    if unknown:
        raise ConfigParse(f"unknown top-level keys: {sorted(unknown)}")
    mort = sections.pop("mortality", None)
    if mort is not None:
        if "m0" in data:
            raise ConfigParse("give either m0 or a [mortality] section, not both")
        extra = set(mort) - {"age", "modal_age", "dispersion"}
        if extra or len(mort) != 3:
            raise ConfigParse("[mortality] needs exactly age, modal_age, dispersion")
        data["m0"] = initial_mortality(mort["age"], mort["modal_age"], mort["dispersion"])
    try:
        params = ModelParams.from_mapping({k: float(v) for k, v in data.items()})
    except (RetirementModelError, TypeError, ValueError) as exc:
        raise ConfigParse(str(exc)) from exc

    builders = {"solver": SolverSettings, "sweep": SweepSpec, "primal": PrimalSettings,
                "oracle": OracleSettings}
    unknown = set(sections) - set(builders) - {"outputs"}
    if unknown:
        raise ConfigParse(f"unknown sections: {sorted(unknown)}")
    kw = {name: _section(cls, sections[name], name) for name, cls in builders.items() if name in sections}
    outputs = sections.get("outputs", {})
    if set(outputs) - {"dir"}:
        raise ConfigParse(f"unknown keys in [outputs]: {sorted(set(outputs) - {'dir'})}")
    sweep = kw.get("sweep")
    if sweep is not None and sweep.axis not in set(ModelParams.field_names()) | set(STATE_AXES):
        raise ConfigParse(f"sweep axis {sweep.axis!r} is neither a parameter nor one of {STATE_AXES}")
    return RunConfig(params=params, outputs=outputs.get("dir", "out"), seed=int(seed), **kw)


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigParse(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


# helpers ---------------------------------------------------------------------------

def boundary_invariant_failures(sol: BoundarySolution) -> list[str]:
    """Structural checks every solved boundary must pass."""
    L = sol.constants.L_terminal
    fails = []
    if sol.b_star[0] != L:
        fails.append("b_star[0] != L")
    step = np.diff(sol.b_star)
    if sol.regime is GammaRegime.HIGH:
        if np.any(step < -sol.root_tol) or np.any(sol.b_star < L):
            fails.append("boundary not non-decreasing from L in xi")
    elif np.any(step > sol.root_tol) or np.any(sol.b_star > L):
        fails.append("boundary not non-increasing from L in xi")
    if np.any(np.abs(sol.residuals) > sol.root_tol):
        fails.append("residual above tolerance")
    return fails


def wealth_boundary_rows(sol: BoundarySolution, y: float, n_points: int = 21) -> list[dict]:
    rows = []
    for t in np.linspace(0.0, sol.horizon, n_points):
        t = float(t)
        m = float(sol.mortality_at_t(t))
        bh = wealth_boundary(t, m, y, sol)
        rows.append({"t": t, "m": m, "b_star": float(sol.boundary_at(sol.horizon - t)),
                     "b_hat": bh, "upsilon": bh / y})
    return rows


def _wealth_grid(cfg: PrimalSettings, sol: BoundarySolution) -> np.ndarray:
    if cfg.w_values is not None:
        return np.asarray(cfg.w_values, float)
    bh = wealth_boundary(cfg.t, None, cfg.y, sol)
    return np.linspace(0.05 * bh, 1.5 * bh, cfg.n_w)


def _meta(sol: BoundarySolution) -> dict:
    meta = {"fingerprint": sol.fingerprint()}
    if sol.overridden:
        meta["assumptions_overridden"] = True
    return meta


def _solve(cfg: RunConfig, params: ModelParams, override: bool) -> BoundarySolution:
    return solve_boundary(params, n_steps=cfg.solver.n_steps, root_tol=cfg.solver.root_tol,
                          allow_override=override)


# subcommands -------------------------------------------------------------------------

def cmd_validate(cfg: RunConfig, out: Path, override: bool) -> int:
    p = cfg.params
    checks = check_assumptions(p)
    ok = all(c.passed for c in checks)
    if checks[0].passed:
        dc = derive_constants(p, allow_override=True)
        consts = {"theta": dc.theta, "kappa": dc.kappa, "rho": dc.rho, "mu1": dc.mu1,
                  "sigma1": dc.sigma1, "L_terminal": dc.L_terminal}
        for k, v in consts.items():
            print(f"{k:<12}= {v:.10g}")
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<24} {c.inequality}  (lhs={c.lhs:.6g}, rhs={c.rhs:.6g})")
    rows = [{"check": c.name, "lhs": c.lhs, "rhs": c.rhs, "status": "PASS" if c.passed else "FAIL"}
            for c in checks]
    meta = {"fingerprint": p.fingerprint()}
    if not ok and override:
        meta["assumptions_overridden"] = True
    write_text(out / "assumptions.csv", table_text(["check", "lhs", "rhs", "status"], rows, meta))
    return EXIT_OK if ok or (override and checks[0].passed) else EXIT_CONFIG


def cmd_boundary(cfg: RunConfig, out: Path, override: bool) -> int:
    sol = _solve(cfg, cfg.params, override)
    sol.to_csv(out / "boundary.csv")
    fails = boundary_invariant_failures(sol)
    print(f"b*(xi=0) = {sol.b_star[0]:.12g}, b*(xi={sol.horizon:g}) = {sol.b_star[-1]:.12g}")
    for f in fails:
        print(f"INVARIANT VIOLATED: {f}", file=sys.stderr)
    return EXIT_INVARIANT if fails else EXIT_OK


def cmd_primal(cfg: RunConfig, out: Path, override: bool) -> int:
    sol = _solve(cfg, cfg.params, override)
    sol.to_csv(out / "boundary.csv")
    pc = cfg.primal
    rows = policy_sweep(sol, pc.t, pc.y, _wealth_grid(pc, sol))
    write_text(out / "policy.csv", policy_csv_text(rows, sol.fingerprint(), sol.overridden))
    write_text(out / "wealth_boundary.csv",
               table_text(["t", "m", "b_star", "b_hat", "upsilon"], wealth_boundary_rows(sol, pc.y), _meta(sol)))
    print(f"b_hat(t={pc.t:g}, y={pc.y:g}) = {rows[0]['b_hat']:.10g}")
    fails = boundary_invariant_failures(sol)
    fails += [f"retire_now inconsistent at w={r['w']!r}" for r in rows
              if r["retire_now"] != (r["w"] >= r["b_hat"])]
    for f in fails:
        print(f"INVARIANT VIOLATED: {f}", file=sys.stderr)
    return EXIT_INVARIANT if fails else EXIT_OK


def default_mc_states(sol: BoundarySolution) -> list[tuple[float, float]]:
    """Five (xi, x) continuation states spread over the horizon."""
    n = sol.n_steps
    picks = [(n, 0.8), (3 * n // 4, 0.95), (n // 2, 0.97), (n // 4, 0.9), (n, 0.99)]
    return [(float(sol.xi_grid[k]), frac * float(sol.b_star[k])) for k, frac in picks]


def cmd_oracle(cfg: RunConfig, out: Path, override: bool, seed: int) -> int:
    sol = _solve(cfg, cfg.params, override)
    sol.to_csv(out / "boundary.csv")
    oc = cfg.oracle
    spec = LatticeSpec.covering(sol, oc.n_time, oc.n_space, oc.stencil)
    if oc.x_lo is not None or oc.x_hi is not None:
        spec = dataclasses.replace(spec, x_lo=oc.x_lo or spec.x_lo, x_hi=oc.x_hi or spec.x_hi)
    rep = lattice_solve(cfg.params, spec, allow_override=override)

    summary = []
    for xi in oc.compare_xi:
        if not 0 < xi <= sol.horizon:
            continue
        bl, bi = rep.boundary_at_xi(xi), float(sol.boundary_at(xi))
        gap = abs(bl - bi) / bi
        summary.append({"check": "lattice_boundary", "xi": xi, "x": None, "value": gap,
                        "threshold": oc.max_rel_gap, "status": "PASS" if gap <= oc.max_rel_gap else "FAIL"})
    if oc.mc_states is None:
        states = default_mc_states(sol)
    else:
        states = [(float(xi), frac * float(sol.boundary_at(xi))) for xi, frac in oc.mc_states]
    for i, (xi, x) in enumerate(states):
        res = mc_evaluate(cfg.params, sol, (x, xi), oc.mc_paths, seed=seed + i)
        jv = float(j_hat(xi, x, None, sol))
        z = (res.mean - jv) / res.stderr if res.stderr > 0 else 0.0
        rep.mc_rows.append({"xi": xi, "x": x, "j_hat": jv, "mc_mean": res.mean,
                            "mc_stderr": res.stderr, "z_score": z})
        summary.append({"check": "mc_value", "xi": xi, "x": x, "value": abs(z), "threshold": oc.max_z,
                        "status": "PASS" if abs(z) <= oc.max_z else "FAIL"})
    rep.overridden = sol.overridden
    write_text(out / "oracle_boundary.csv", rep.to_csv_text(sol))
    write_text(out / "oracle_mc.csv", rep.mc_csv_text())
    cols = ["check", "xi", "x", "value", "threshold", "status"]
    write_text(out / "oracle_summary.csv", table_text(cols, summary, _meta(sol)))
    for row in summary:
        where = f"xi={row['xi']:g}" + (f", x={row['x']:.6g}" if row["x"] is not None else "")
        print(f"{row['status']}  {row['check']:<17} {where:<24} {row['value']:.4g} (limit {row['threshold']:g})")
    fails = boundary_invariant_failures(sol) + [r["check"] for r in summary if r["status"] != "PASS"]
    return EXIT_INVARIANT if fails else EXIT_OK


def _sweep_worker(job):
    """Solve one sweep point; returns (index, summary row, comparison rows, failures)."""
    cfg, axis, idx, value, override, out = job
    pc = cfg.primal
    if axis in ModelParams.field_names() or axis == "m":
        params = cfg.params.replace(**{"m0" if axis == "m" else axis: float(value)})
        sol = _solve(cfg, params, override)
        t, y = pc.t, pc.y
    else:
        sol = _solve(cfg, cfg.params, override)
        t = float(value) if axis == "t" else pc.t
        y = float(value) if axis == "y" else pc.y
    stem = f"sweep_{axis}_{idx:03d}"
    sol.to_csv(out / f"{stem}_boundary.csv")
    wealth = [float(value)] if axis == "w" else _wealth_grid(dataclasses.replace(pc, t=t, y=y), sol)
    rows = policy_sweep(sol, t, y, wealth)
    write_text(out / f"{stem}_policy.csv", policy_csv_text(rows, sol.fingerprint(), sol.overridden))
    bh = wealth_boundary(t, None, y, sol)
    summary = {"axis": axis, "value": float(value), "fingerprint": sol.fingerprint(), "t": t, "y": y,
               "b_star": float(sol.boundary_at(sol.horizon - t)), "b_hat": bh, "upsilon": bh / y}
    if axis == "w":
        summary.update(z_star=rows[0]["z_star"], c_star=rows[0]["c_star"], pi_star=rows[0]["pi_star"],
                       retire_now=rows[0]["retire_now"], V=rows[0]["V"])
    comparison = [dict(axis=axis, value=float(value), fingerprint=sol.fingerprint(), **r)
                  for r in wealth_boundary_rows(sol, y)]
    return idx, summary, comparison, boundary_invariant_failures(sol), sol.overridden


def cmd_sweep(cfg: RunConfig, out: Path, override: bool) -> int:
    if cfg.sweep is None:
        raise ConfigParse("sweep subcommand needs a [sweep] section with axis and values")
    sw = cfg.sweep
    jobs = [(cfg, sw.axis, i, v, override, out) for i, v in enumerate(sw.values)]
    workers = sw.workers or min(len(jobs), os.cpu_count() or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_worker, jobs))
    else:
        results = [_sweep_worker(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    overridden = any(r[4] for r in results)
    meta = {"axis": sw.axis}
    if overridden:
        meta["assumptions_overridden"] = True
    scols = ["axis", "value", "fingerprint", "t", "y", "b_star", "b_hat", "upsilon"]
    if sw.axis == "w":
        scols += ["z_star", "c_star", "pi_star", "retire_now", "V"]
    write_text(out / f"sweep_{sw.axis}_summary.csv", table_text(scols, [r[1] for r in results], meta))
    ccols = ["axis", "value", "fingerprint", "t", "m", "b_star", "b_hat", "upsilon"]
    write_text(out / f"sweep_{sw.axis}_comparison.csv",
               table_text(ccols, [row for r in results for row in r[2]], meta))
    for r in results:
        s = r[1]
        print(f"{sw.axis}={s['value']:<12g} b_hat(t={s['t']:g}, y={s['y']:g}) = {s['b_hat']:.10g}")
    fails = [f for r in results for f in r[3]]
    for f in fails:
        print(f"INVARIANT VIOLATED: {f}", file=sys.stderr)
    return EXIT_INVARIANT if fails else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="retirebound", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=["validate", "boundary", "primal", "oracle", "sweep"])
    ap.add_argument("--config", help="TOML run configuration")
    ap.add_argument("--out", help="output directory (overrides outputs.dir)")
    ap.add_argument("--seed", type=int, help="Monte-Carlo seed (overrides config seed)")
    ap.add_argument("--allow-assumption-override", action="store_true",
                    help="run despite failed standing assumptions; outputs are watermarked")
    return ap


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = Path(args.out or cfg.outputs)
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise ConfigParse(f"output directory {out} is not writable")
        seed = cfg.seed if args.seed is None else args.seed
        override = args.allow_assumption_override
        if args.command == "validate":
            return cmd_validate(cfg, out, override)
        if args.command == "boundary":
            return cmd_boundary(cfg, out, override)
        if args.command == "primal":
            return cmd_primal(cfg, out, override)
        if args.command == "oracle":
            return cmd_oracle(cfg, out, override, seed)
        return cmd_sweep(cfg, out, override)
    except (ConfigParse, AssumptionViolated) as exc:
        print(f"error [{exc.component}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RetirementModelError as exc:
        print(f"error [{exc.component}]: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
