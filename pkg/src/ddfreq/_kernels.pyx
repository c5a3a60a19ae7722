# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: RK4 grid integration and the secular-equation root.

Mirrors ``_kernels_py`` exactly (same signatures, same arithmetic order where
it matters for the tests).
"""
from libc.math cimport sqrt, fabs, isfinite, INFINITY

import numpy as np
cimport numpy as cnp

cnp.import_array()


def secular_root(double[::1] h, double[::1] bp, double c, double lam, int max_iters=200):
    cdef Py_ssize_t n = h.shape[0], i
    cdef double b2sum = 0.0, bnorm, hmax = 0.0, hi = INFINITY, lo = 0.0
    cdef double mu, s, ds, r, val, der, nxt, den
    cdef int it = 0
    for i in range(n):
        b2sum += bp[i] * bp[i]
        if h[i] > hmax:
            hmax = h[i]
    bnorm = sqrt(b2sum)
    if lam <= 0.0:
        return 0.0, 0
    if c * c == 0.0:  # denormal c behaves as c = 0
        c = 0.0
    if c == 0.0 and bnorm <= lam:
        return 0.0, 0
    if c > 0.0:
        hi = lam / c
    if bnorm > lam:
        r = lam * hmax / (bnorm - lam) * (1.0 + 1e-12) + 1e-300
        if r < hi:
            hi = r
    mu = hi
    for it in range(1, max_iters + 1):
        s = 0.0
        ds = 0.0
        for i in range(n):
            den = h[i] + mu
            s += bp[i] * bp[i] / (den * den)
            ds += bp[i] * bp[i] / (den * den * den)
        ds *= -2.0
        r = sqrt(c * c + s)
        val = mu * r - lam
        der = r + mu * ds / (2.0 * r)
        if val > 0.0:
            hi = mu
        else:
            lo = mu
        if fabs(val) <= 1e-15 * lam or hi - lo <= 2e-16 * hi:
            break
        if der > 0.0:
            nxt = mu - val / der
        else:
            nxt = 0.5 * (lo + hi)
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        mu = nxt
    return mu, it


cdef inline double _deadband(double x, double db) noexcept nogil:
    if x > db:
        return x - db
    if x < -db:
        return x + db
    return 0.0


cdef void _deriv(double[::1] x, double[::1] out, Py_ssize_t na, Py_ssize_t nk,
                 double[::1] two_h, double[::1] damp, double[::1] inv_rg,
                 double[::1] t_r, double[::1] f_h, double[::1] db, double[::1] pref,
                 double[:, ::1] lap, double w0, long[::1] ibr_area, double[::1] tau,
                 double[::1] setpoint, double[::1] pu, double[::1] ptie,
                 double[::1] pibr) noexcept nogil:
    cdef Py_ssize_t i, j, k
    cdef double w, z, pm, acc
    for i in range(na):
        acc = 0.0
        for j in range(na):
            acc = acc + lap[i, j] * x[2 * na + j]
        ptie[i] = acc
        pibr[i] = 0.0
    for k in range(nk):
        pibr[ibr_area[k]] += x[4 * na + k]
    for i in range(na):
        w = x[i]
        z = _deadband(w, db[i])
        pm = x[na + i] - f_h[i] * inv_rg[i] * z
        out[i] = (-damp[i] * w + pm - pu[i] - ptie[i] + pibr[i]) / two_h[i]
        out[na + i] = (-x[na + i] + pref[i] - (1.0 - f_h[i]) * inv_rg[i] * z) / t_r[i]
        out[2 * na + i] = w0 * w
        out[3 * na + i] = ptie[i]
    for k in range(nk):
        out[4 * na + k] = (setpoint[k] - x[4 * na + k]) / tau[k]


def rk4_interval(double[::1] x, double h, int n_sub, double[::1] two_h, double[::1] damp,
                 double[::1] inv_rg, double[::1] t_r, double[::1] f_h, double[::1] db,
                 double[::1] pref, double[:, ::1] lap, double w0, ibr_area,
                 double[::1] tau, double[::1] setpoint, double[:, ::1] pu_half):
    cdef Py_ssize_t na = two_h.shape[0], nk = tau.shape[0], nx = x.shape[0], s, i
    cdef long[::1] area = np.ascontiguousarray(ibr_area, dtype=np.int64)
    cdef double[::1] k1 = np.empty(nx), k2 = np.empty(nx), k3 = np.empty(nx), k4 = np.empty(nx)
    cdef double[::1] tmp = np.empty(nx)
    cdef double[::1] ptie = np.empty(na), pibr = np.empty(na)
    cdef double sixth = h / 6.0
    cdef bint ok = True
    with nogil:
        for s in range(n_sub):
            _deriv(x, k1, na, nk, two_h, damp, inv_rg, t_r, f_h, db, pref, lap, w0,
                   area, tau, setpoint, pu_half[2 * s], ptie, pibr)
            for i in range(nx):
                tmp[i] = x[i] + 0.5 * h * k1[i]
            _deriv(tmp, k2, na, nk, two_h, damp, inv_rg, t_r, f_h, db, pref, lap, w0,
                   area, tau, setpoint, pu_half[2 * s + 1], ptie, pibr)
            for i in range(nx):
                tmp[i] = x[i] + 0.5 * h * k2[i]
            _deriv(tmp, k3, na, nk, two_h, damp, inv_rg, t_r, f_h, db, pref, lap, w0,
                   area, tau, setpoint, pu_half[2 * s + 1], ptie, pibr)
            for i in range(nx):
                tmp[i] = x[i] + h * k3[i]
            _deriv(tmp, k4, na, nk, two_h, damp, inv_rg, t_r, f_h, db, pref, lap, w0,
                   area, tau, setpoint, pu_half[2 * s + 2], ptie, pibr)
            for i in range(nx):
                x[i] = x[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        for i in range(nx):
            if not isfinite(x[i]):
                ok = False
    return ok
