import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from retirebound import (
    BoundarySolution,
    BracketNotFound,
    ModelParams,
    MortalityMismatch,
    NegativeValueBeyondTolerance,
    d_arguments,
    derive_constants,
    g_kernel,
    j_hat,
    q_factor,
    solve_boundary,
)
from retirebound.boundary import kernel_constants, recompute_residuals
from retirebound.kernels import available_backends
from retirebound.model import expm1_ratio

M = 0.004


def test_d_arguments_drift_free_probe(params):
    dc = derive_constants(params)
    _, _, _, _, c1, _, mort, _, _ = kernel_constants(params, dc)
    s = 1.7
    y = math.exp(c1 * s + mort * M * float(expm1_ratio(params.a, s)))
    d1, _ = d_arguments(s, y, M, params)
    assert abs(d1) < 1e-14


def test_d_arguments_difference(params):
    d1, d2 = d_arguments(1.0, 1.3, M, params)
    assert d1 - d2 == pytest.approx(0.025 * 2 / 3, rel=1e-12)
    assert d1 - d2 == pytest.approx(0.016667, abs=1e-6)


def test_d_arguments_small_lag(params):
    ratios = [abs(d_arguments(s, 1.0, M, params)[0]) / math.sqrt(s) for s in (1e-2, 1e-4, 1e-6)]
    assert max(ratios) < 1.0
    assert np.ptp(ratios) < 0.01


def test_g_kernel_start_on_terminal_level(params):
    dc = derive_constants(params)
    L = dc.L_terminal
    g0 = g_kernel(1.0, 0.0, L, L, M, params)
    assert abs(g0) < 1e-15
    b = 2.2
    expect = 0.5 * (dc.reward_coef * b ** dc.p + 1)
    assert g_kernel(1.0, 0.0, b, b, M, params) == pytest.approx(expect, rel=1e-14)


def test_g_kernel_ratio_limits(params):
    dc = derive_constants(params)
    b, s = 2.45, 0.7
    assert abs(g_kernel(1.0, s, b, b * 1e-12, M, params)) < 1e-15
    far = g_kernel(1.0, s, b, b * 1e12, M, params)
    from retirebound import growth_factor_N
    expect = math.exp(-dc.kappa * s) * (dc.reward_coef * b ** dc.p * growth_factor_N(s, M, params) + 1)
    assert far == pytest.approx(expect, rel=1e-12)


def test_terminal_value_exact(sol200, params):
    assert sol200.b_star[0] == derive_constants(params).L_terminal
    assert sol200.xi_grid[-1] == params.T_horizon


def test_boundary_monotone_above_terminal(sol200):
    L = sol200.constants.L_terminal
    assert np.all(np.diff(sol200.b_star) >= 0)
    assert sol200.b_star[-1] > L
    assert np.all(sol200.b_star >= L)


def test_residuals_within_tolerance(sol200):
    assert np.all(np.abs(sol200.residuals) <= sol200.root_tol)
    assert np.all(np.abs(recompute_residuals(sol200)) <= sol200.root_tol)


@pytest.mark.skipif("compiled" not in available_backends(), reason="extension not built")
def test_backends_agree(params):
    a = solve_boundary(params, n_steps=120, backend="python")
    b = solve_boundary(params, n_steps=120, backend="compiled")
    assert np.max(np.abs(a.b_star - b.b_star)) < 1e-10
    x = np.linspace(1.0, 2.49, 7)
    assert np.allclose(j_hat(10.0, x, None, a, backend="python"),
                       j_hat(10.0, x, None, a, backend="compiled"), rtol=1e-12, atol=1e-15)


def test_refinement_converges(params):
    ref = solve_boundary(params, n_steps=800)
    full, interior = [], []
    for n in (50, 100, 200, 400):
        s = solve_boundary(params, n_steps=n)
        err = np.abs(s.b_star - np.interp(s.xi_grid, ref.xi_grid, ref.b_star))
        full.append(err.max())
        interior.append(err[s.xi_grid >= 0.5].max())
    assert all(e1 > e2 for e1, e2 in zip(full, full[1:]))
    # away from the square-root layer at expiry the scheme is at least first order
    orders = [math.log2(e1 / e2) for e1, e2 in zip(interior, interior[1:])]
    assert min(orders) >= 1.0


def test_boundary_monotone_in_mortality(params, sol200):
    hi = solve_boundary(params, m=1.5 * M, n_steps=200)
    assert np.all(hi.b_star >= sol200.b_star - 1e-12)


def test_low_gamma_regime(sol_low_gamma):
    s = sol_low_gamma
    L = s.constants.L_terminal
    assert s.b_star[0] == L
    assert np.all(np.diff(s.b_star) <= 0) and np.all(s.b_star <= L)
    x = np.linspace(0.9, 3.0, 30) * s.b_star[-1]
    v = j_hat(s.horizon, x, None, s)
    assert np.all(v >= 0) and np.all(np.diff(v) >= -1e-9)


def test_bracket_not_found_reports_bracket():
    p = ModelParams(sigma_y=0.08)  # sigma1 has the wrong sign for gamma > 1
    with pytest.raises(BracketNotFound) as exc:
        solve_boundary(p, n_steps=10, allow_override=True)
    assert exc.value.bracket is not None and exc.value.step == 1


def test_n_steps_validation(params):
    with pytest.raises(ValueError):
        solve_boundary(params, n_steps=1)


def test_csv_round_trip(sol200):
    text = sol200.to_csv_text()
    again = BoundarySolution.from_csv_text(text)
    assert again.to_csv_text() == text
    assert np.array_equal(again.b_star, sol200.b_star)
    assert text.splitlines()[0] == f"# fingerprint={sol200.fingerprint()}"
    assert "\r" not in text


def test_csv_fingerprint_checked(sol200):
    text = sol200.to_csv_text().replace("K=2.0", "K=2.5")
    with pytest.raises(ValueError):
        BoundarySolution.from_csv_text(text)


# value approximation ---------------------------------------------------------------

def test_j_hat_terminal_zero(sol200):
    assert np.all(j_hat(0.0, np.array([0.5, 2.0, 3.0]), None, sol200) == 0.0)


def test_j_hat_vanishes_on_boundary(sol200):
    for k in (20, 100, 200):
        xi = sol200.xi_grid[k]
        assert abs(j_hat(xi, sol200.b_star[k], None, sol200)) <= 10 * sol200.root_tol


def test_j_hat_continuation_side_limit_small(sol200):
    # just inside the continuation region the quadrature leaves an O(h^1.5) residue
    b = sol200.b_star[-1]
    assert 0 <= j_hat(10.0, b * (1 - 1e-12), None, sol200) < 1e-4


def test_j_hat_bounds(sol200):
    for xi in (0.5, 2.5, 7.3, 10.0):
        x = np.linspace(0.2, 3.0, 40)
        v = j_hat(xi, x, None, sol200)
        assert np.all(v >= 0)
        assert np.all(v <= q_factor(0.0, xi, 0.04) + 1e-4)


def test_j_hat_asymptotics(sol200):
    q = float(q_factor(0.0, 10.0, 0.04))
    assert j_hat(10.0, 1e-8, None, sol200) == pytest.approx(q, abs=1e-3)
    assert j_hat(10.0, 100.0, None, sol200) == 0.0


@settings(max_examples=40, deadline=None)
@given(xi=st.floats(0.05, 10.0), x=st.floats(0.5, 2.6))
def test_j_hat_off_node_between_neighbours(sol200, xi, x):
    h = sol200.h
    k = math.floor(xi / h)
    lo = j_hat(k * h, x, None, sol200)
    hi = j_hat(min((k + 1) * h, 10.0), x, None, sol200)
    mid = j_hat(xi, x, None, sol200)
    assert min(lo, hi) - 1e-6 <= mid <= max(lo, hi) + 1e-6


def test_j_hat_mortality_must_be_on_path(sol200):
    m_here = float(sol200.mortality_at_xi(5.0))
    assert j_hat(5.0, 2.0, m_here, sol200) == j_hat(5.0, 2.0, None, sol200)
    with pytest.raises(MortalityMismatch):
        j_hat(5.0, 2.0, 2 * m_here, sol200)


def test_j_hat_flags_inconsistent_boundary(sol200):
    bad = sol200.with_boundary(sol200.b_star * 1.3)
    with pytest.raises(NegativeValueBeyondTolerance):
        j_hat(10.0, sol200.b_star[-1] * 1.25, None, bad)
