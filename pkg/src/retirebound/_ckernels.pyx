# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; same entry points and semantics as ``_pykernels``."""

from libc.math cimport exp, log, sqrt, erfc, pow, fabs, M_SQRT1_2

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef int STATUS_OK = 0
cdef int STATUS_NO_BRACKET = 1
cdef int STATUS_TOL_NOT_MET = 2
cdef int MAX_BISECTIONS = 200


cdef inline double ncdf(double d) noexcept nogil:
    return 0.5 * erfc(-d * M_SQRT1_2)


cdef double term_sum(double lnx, double p, Py_ssize_t k, double[::1] u, double[::1] v,
                     double[::1] inv_sq, double[::1] wN, double[::1] wD) noexcept nogil:
    cdef Py_ssize_t j
    cdef double s1 = 0.0, s2 = 0.0
    for j in range(k):
        s2 += wN[j] * ncdf((v[j] - lnx) * inv_sq[j])
        s1 += wD[j] * ncdf((u[j] - lnx) * inv_sq[j])
    return exp(p * lnx) * s2 + s1


def weighted_sum(lnx, u, v, inv_sq, wN, wD, double p):
    cdef double[::1] lx = np.ascontiguousarray(np.atleast_1d(lnx), dtype=np.float64)
    cdef double[::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef double[::1] iq = np.ascontiguousarray(inv_sq, dtype=np.float64)
    cdef double[::1] wn = np.ascontiguousarray(wN, dtype=np.float64)
    cdef double[::1] wd = np.ascontiguousarray(wD, dtype=np.float64)
    cdef Py_ssize_t i, nx = lx.shape[0], k = uu.shape[0]
    out = np.empty(nx)
    cdef double[::1] o = out
    with nogil:
        for i in range(nx):
            o[i] = term_sum(lx[i], p, k, uu, vv, iq, wn, wd)
    return out


cdef inline double step_residual(double x, double h, double coef, double p, Py_ssize_t k,
                                 double[::1] u, double[::1] v, double[::1] inv_sq,
                                 double[::1] wN, double[::1] wD) noexcept nogil:
    return term_sum(log(x), p, k, u, v, inv_sq, wN, wD) + 0.25 * h * (coef * pow(x, p) + 1.0)


cdef int _recursion(double L, double h, double[::1] S, double[::1] E, double[::1] mp,
                    double kappa, double coef, double p, double sigma1, double c1, double c2,
                    double mort, double nu, double gamma, double root_tol, int max_doublings,
                    double grow, double[::1] b, double[::1] res, double[::1] inf,
                    double[::1] lnb, double[::1] u, double[::1] v, double[::1] iq,
                    double[::1] wN, double[::1] wD) noexcept nogil:
    cdef Py_ssize_t n = b.shape[0] - 1
    cdef Py_ssize_t k, j, lag, it
    cdef double m, w, s, mE, disc, near, far, f_near, f_far, lo, hi, mid = 0.0, fm = 0.0
    cdef bint found

    b[0] = L
    lnb[0] = log(L)
    res[0] = 0.0
    for k in range(1, n + 1):
        m = mp[k]
        for j in range(k):
            lag = k - j
            s = S[lag]
            mE = m * E[lag]
            w = 0.5 * h if j == 0 else h
            disc = w * exp(-kappa * s)
            iq[j] = 1.0 / (sigma1 * sqrt(s))
            u[j] = lnb[j] - (c1 * s + mort * mE)
            v[j] = lnb[j] - (c2 * s + mort * mE)
            wN[j] = disc * coef * exp(nu * s - mE / gamma)
            wD[j] = disc

        near = L
        f_near = step_residual(near, h, coef, p, k, u, v, iq, wN, wD)
        far = L * grow
        f_far = step_residual(far, h, coef, p, k, u, v, iq, wN, wD)
        found = (f_far > 0) != (f_near > 0)
        it = 0
        while not found and it < max_doublings:
            far *= grow
            f_far = step_residual(far, h, coef, p, k, u, v, iq, wN, wD)
            found = (f_far > 0) != (f_near > 0)
            it += 1
        if not found:
            inf[0] = k; inf[1] = near; inf[2] = far; inf[3] = f_near; inf[4] = f_far
            return STATUS_NO_BRACKET

        lo = near
        hi = far
        found = False
        for it in range(MAX_BISECTIONS):
            mid = 0.5 * (lo + hi)
            fm = step_residual(mid, h, coef, p, k, u, v, iq, wN, wD)
            if fm == 0.0 or (fabs(hi - lo) <= root_tol and fabs(fm) <= root_tol):
                found = True
                break
            if (fm > 0) == (f_near > 0):
                lo = mid
            else:
                hi = mid
        if not found:
            inf[0] = k; inf[1] = lo; inf[2] = hi
            inf[3] = step_residual(lo, h, coef, p, k, u, v, iq, wN, wD)
            inf[4] = step_residual(hi, h, coef, p, k, u, v, iq, wN, wD)
            return STATUS_TOL_NOT_MET
        b[k] = mid
        lnb[k] = log(mid)
        res[k] = fm
    return STATUS_OK


def solve_recursion(double L, double h, lag_s, lag_e, m_path, kc, double root_tol,
                    int max_doublings, bint high_regime, b_out, resid_out, info):
    """Sequential trapezoid recursion; fills ``b_out``/``resid_out`` and returns a status."""
    cdef Py_ssize_t n = len(b_out) - 1
    cdef double[::1] S = np.ascontiguousarray(lag_s, dtype=np.float64)
    cdef double[::1] E = np.ascontiguousarray(lag_e, dtype=np.float64)
    cdef double[::1] mp = np.ascontiguousarray(m_path, dtype=np.float64)
    cdef double[::1] b = b_out
    cdef double[::1] res = resid_out
    cdef double[::1] inf = info
    cdef double[::1] lnb = np.empty(n + 1)
    cdef double[::1] u = np.empty(max(n, 1)), v = np.empty(max(n, 1)), iq = np.empty(max(n, 1))
    cdef double[::1] wN = np.empty(max(n, 1)), wD = np.empty(max(n, 1))
    cdef double grow = 2.0 if high_regime else 0.5
    cdef double kappa = kc[0], coef = kc[1], p = kc[2], sigma1 = kc[3]
    cdef double c1 = kc[4], c2 = kc[5], mort = kc[6], nu = kc[7], gamma = kc[8]
    cdef int status
    with nogil:
        status = _recursion(L, h, S, E, mp, kappa, coef, p, sigma1, c1, c2, mort,
                            nu, gamma, root_tol, max_doublings, grow, b, res, inf,
                            lnb, u, v, iq, wN, wD)
    return status
