import threading

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from retirebound import (
    NonPositiveWealth,
    QProfile,
    c_integral,
    post_retirement_consumption,
    post_retirement_value,
    q_reduced,
    q_reduced_x,
    q_reduced_xx,
)

# 40-digit mpmath quadrature of I(m) at the baseline parameters
I_REF = 20.825323055347302562
I_REF_A5 = 1.4901913932030891420


@pytest.fixture(scope="module")
def prof(params):
    return QProfile(params)


def _mp_integral(p, m):
    mp.mp.dps = 30
    g, th = mp.mpf(p.gamma), (mp.mpf(p.mu) - mp.mpf(p.r)) / mp.mpf(p.sigma)
    c = mp.mpf(p.beta) / g + (g - 1) / g * (mp.mpf(p.r) + th**2 / 2) - (g - 1) ** 2 * th**2 / (2 * g**2)
    a = mp.mpf(p.a)
    f = lambda s: mp.exp(-c * s - mp.mpf(m) / (g * a) * (mp.exp(a * s) - 1))  # noqa: E731
    return float(mp.quad(f, mp.linspace(0, 300, 31)))


def test_integral_matches_high_precision_oracle(prof):
    assert prof.integral(0.004) == pytest.approx(I_REF, rel=1e-10)


def test_integral_independent_reevaluation(params):
    m = 0.0071
    assert QProfile(params).integral(m) == pytest.approx(_mp_integral(params, m), rel=1e-10)


def test_integral_steep_gompertz(params):
    p5 = params.replace(a=5.0)
    prof5 = QProfile(p5)
    assert prof5.truncation_horizon(0.004) < QProfile(params).truncation_horizon(0.004)
    assert prof5.integral(0.004) == pytest.approx(I_REF_A5, rel=1e-10)


def test_integral_against_midpoint_brute_force(prof):
    S = prof.truncation_horizon(0.004)
    n = 1_000_000
    s = (np.arange(n) + 0.5) * (S / n)
    brute = prof.integrand(s, 0.004).sum() * (S / n)
    assert prof.integral(0.004) == pytest.approx(brute, rel=1e-8)


def test_integral_decreasing_in_m(prof):
    assert prof.integral(0.04) < prof.integral(0.004)
    vals = [prof.integral(m) for m in (0.001, 0.004, 0.01, 0.05, 0.2)]
    assert np.all(np.diff(vals) < 0)


def test_c_sign_and_cache(prof, params):
    c = prof.c_of_m(0.004)
    assert c < 0
    assert c == pytest.approx(-19.678697166219810940, rel=1e-10)
    assert prof._cache[0.004] == c
    assert c_integral(params, 0.004) == pytest.approx(c, rel=1e-12)


def test_c_positive_for_low_gamma():
    from retirebound import ModelParams
    assert QProfile(ModelParams(gamma=0.5, beta=0.05)).c_of_m(0.004) > 0


def test_cache_thread_safe(params):
    prof = QProfile(params)
    ms = [0.004 * (1 + 0.01 * i) for i in range(20)]
    results = {}

    def work(i):
        results[i] = [prof.c_of_m(m) for m in ms]

    threads = [threading.Thread(target=work, args=(i,)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(results[i] == results[0] for i in results)


def test_q_closed_forms(prof):
    c = prof.c_of_m(0.004)
    assert q_reduced(1.0, 0.004, prof) == c
    h = 1e-5
    fd = (q_reduced(2 + h, 0.004, prof) - q_reduced(2 - h, 0.004, prof)) / (2 * h)
    assert q_reduced_x(2.0, 0.004, prof) == pytest.approx(fd, rel=1e-7)
    fd2 = (q_reduced_x(2 + h, 0.004, prof) - q_reduced_x(2 - h, 0.004, prof)) / (2 * h)
    assert q_reduced_xx(2.0, 0.004, prof) == pytest.approx(fd2, rel=1e-7)
    assert q_reduced(3.7 * 1.3, 0.004, prof) == pytest.approx(3.7 ** (2 / 3) * q_reduced(1.3, 0.004, prof),
                                                              rel=1e-12)


def test_q_convex_decreasing_in_z(prof):
    z = np.geomspace(0.05, 20, 60)
    Q = q_reduced(z, 0.004, prof)
    assert np.all(Q < 0)
    assert np.all(np.diff(Q) < 0)
    slopes = np.diff(Q) / np.diff(z)
    assert np.all(np.diff(slopes) > 0)


@given(w=st.floats(0.1, 500))
def test_post_retirement_first_order_condition(prof, w):
    V, z = post_retirement_value(w, 0.004, prof)
    assert abs(q_reduced_x(z, 0.004, prof) + w) < 1e-10 * max(1.0, w)
    assert V == pytest.approx(q_reduced(z, 0.004, prof) + z * w, rel=1e-12)


def test_post_retirement_envelope(prof):
    w = 24.0
    h = 1e-6 * w
    V0, z = post_retirement_value(w, 0.004, prof)
    V1, _ = post_retirement_value(w + h, 0.004, prof)
    assert (V1 - V0) / h == pytest.approx(z, rel=1e-4)


def test_post_retirement_homogeneity(prof):
    V1, _ = post_retirement_value(10.0, 0.004, prof)
    V2, _ = post_retirement_value(20.0, 0.004, prof)
    assert V2 == pytest.approx(2.0 ** (1 - 3) * V1, rel=1e-10)


def test_post_retirement_errors(prof):
    with pytest.raises(NonPositiveWealth):
        post_retirement_value(0.0, 0.004, prof)


def test_post_retirement_consumption_marginal_utility(prof, params):
    w = 30.0
    _, z = post_retirement_value(w, 0.004, prof)
    c = post_retirement_consumption(w, 0.004, prof)
    # U2(c) = (K c)^{1-g}/(1-g)  =>  U2'(c) = K^{1-g} c^{-g}
    assert params.K ** (1 - params.gamma) * c ** (-params.gamma) == pytest.approx(z, rel=1e-12)
