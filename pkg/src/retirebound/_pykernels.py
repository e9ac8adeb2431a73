"""Pure numpy implementation of the hot kernels.

This module is the reference backend; ``_ckernels`` (Cython) mirrors the same
two entry points and is selected at import when it has been built.

Notation: each quadrature term of the boundary integral is described by five
numbers built in :func:`build_terms`::

    u       log(boundary) minus the d1 drift
    v       log(boundary) minus the d2 drift
    inv_sq  1/(sigma1 sqrt(s))           (signed, so Phi picks the right tail)
    wN      weight * e^{-kappa s} * N(s, m) * reward_coef
    wD      weight * e^{-kappa s}

so that the sum of G over the terms at a trial point x is::

    x^p * sum(wN * Phi((v - ln x) inv_sq)) + sum(wD * Phi((u - ln x) inv_sq))
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr

STATUS_OK = 0
STATUS_NO_BRACKET = 1
STATUS_TOL_NOT_MET = 2
MAX_BISECTIONS = 200


def build_terms(S, E, lnb, w, m, kc):
    """Per-term arrays for lags ``S`` (E = (e^{aS}-1)/a) and log boundary ``lnb``."""
    kappa, coef, p, sigma1, c1, c2, mort, nu, gamma = kc
    S = np.asarray(S, dtype=float)
    mE = m * np.asarray(E, dtype=float)
    inv_sq = 1.0 / (sigma1 * np.sqrt(S))
    disc = w * np.exp(-kappa * S)
    u = lnb - (c1 * S + mort * mE)
    v = lnb - (c2 * S + mort * mE)
    wN = disc * coef * np.exp(nu * S - mE / gamma)
    return u, v, inv_sq, wN, disc


def weighted_sum(lnx, u, v, inv_sq, wN, wD, p):
    """Sum of G over all terms for every entry of ``lnx``."""
    lnx = np.atleast_1d(np.asarray(lnx, dtype=float))
    if u.size == 0:
        return np.zeros_like(lnx)
    col = lnx[:, None]
    s2 = ndtr((v - col) * inv_sq) @ wN
    s1 = ndtr((u - col) * inv_sq) @ wD
    return np.exp(p * lnx) * s2 + s1


def solve_recursion(L, h, lag_s, lag_e, m_path, kc, root_tol, max_doublings, high_regime,
                    b_out, resid_out, info):
    """Sequential trapezoid recursion for the boundary.

    Fills ``b_out[0..n]`` and ``resid_out`` in place; returns a status code.
    On failure ``info`` holds (step, near end, far end, f near, f far).
    """
    coef, p = kc[1], kc[2]
    n = len(b_out) - 1
    lnb = np.empty(n + 1)
    b_out[0] = L
    lnb[0] = np.log(L)
    resid_out[0] = 0.0
    grow = 2.0 if high_regime else 0.5
    for k in range(1, n + 1):
        m = m_path[k]
        lags = slice(k, 0, -1)  # j = 0..k-1  <->  lag k-j
        w = np.full(k, h)
        w[0] = 0.5 * h
        u, v, inv_sq, wN, wD = build_terms(lag_s[lags], lag_e[lags], lnb[:k], w, m, kc)

        def F(x):
            # the s = 0 term starts on the boundary, where Phi takes the value 1/2
            return (weighted_sum(np.log(x), u, v, inv_sq, wN, wD, p)[0]
                    + 0.25 * h * (coef * x**p + 1.0))

        near = L
        f_near = F(near)
        far = L * grow
        f_far = F(far)
        for _ in range(max_doublings):
            if (f_far > 0) != (f_near > 0):
                break
            far *= grow
            f_far = F(far)
        else:
            info[:] = (k, near, far, f_near, f_far)
            return STATUS_NO_BRACKET
        lo, hi = near, far
        for _ in range(MAX_BISECTIONS):
            mid = 0.5 * (lo + hi)
            fm = F(mid)
            if fm == 0.0 or (abs(hi - lo) <= root_tol and abs(fm) <= root_tol):
                break
            if (fm > 0) == (f_near > 0):
                lo = mid
            else:
                hi = mid
        else:
            info[:] = (k, lo, hi, F(lo), F(hi))
            return STATUS_TOL_NOT_MET
        b_out[k] = mid
        lnb[k] = np.log(mid)
        resid_out[k] = fm
    return STATUS_OK
