"""Pure-Python reference kernels.

Same signatures as the compiled ``_kernels`` module; used when the extension
is missing or ``DDFREQ_PURE_PYTHON=1``.
"""
import math

import numpy as np


def secular_root(h, bp, c, lam, max_iters=200):
    """Root ``mu > 0`` of ``mu * sqrt(c^2 + sum(bp^2 / (h + mu)^2)) = lam``.

    Returns ``(0.0, 0)`` when ``c == 0`` and ``|bp| <= lam`` (the minimiser is
    at the kink).
    """
    h = np.asarray(h, dtype=float)
    bp = np.asarray(bp, dtype=float)
    b2 = bp * bp
    bnorm = math.sqrt(float(b2.sum()))
    if lam <= 0.0:
        return 0.0, 0
    if c * c == 0.0:  # denormal c behaves as c = 0
        c = 0.0
    if c == 0.0 and bnorm <= lam:
        return 0.0, 0
    hi = math.inf
    if c > 0.0:
        hi = lam / c
    if bnorm > lam:
        hmax = float(h.max()) if h.size else 0.0
        hi = min(hi, lam * hmax / (bnorm - lam) * (1.0 + 1e-12) + 1e-300)
    lo = 0.0

    def phi(mu):
        s = float(np.sum(b2 / (h + mu) ** 2))
        r = math.sqrt(c * c + s)
        ds = -2.0 * float(np.sum(b2 / (h + mu) ** 3))
        return mu * r - lam, r + mu * ds / (2.0 * r)

    mu = hi
    it = 0
    for it in range(1, max_iters + 1):
        val, der = phi(mu)
        if val > 0.0:
            hi = mu
        else:
            lo = mu
        if abs(val) <= 1e-15 * lam or hi - lo <= 2e-16 * hi:
            break
        nxt = mu - val / der if der > 0.0 else 0.5 * (lo + hi)
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        mu = nxt
    return mu, it


def deadband(x, db):
    if x > db:
        return x - db
    if x < -db:
        return x + db
    return 0.0


def _deriv(x, out, na, nk, two_h, damp, inv_rg, t_r, f_h, db, pref, lap, w0,
           ibr_area, tau, setpoint, pu):
    w = x[:na]
    xi = x[na:2 * na]
    dl = x[2 * na:3 * na]
    p = x[4 * na:4 * na + nk]
    ptie = lap @ dl
    pibr = np.zeros(na)
    np.add.at(pibr, ibr_area, p)
    z = np.where(w > db, w - db, np.where(w < -db, w + db, 0.0))
    pm = xi - f_h * inv_rg * z
    out[:na] = (-damp * w + pm - pu - ptie + pibr) / two_h
    out[na:2 * na] = (-xi + pref - (1.0 - f_h) * inv_rg * z) / t_r
    out[2 * na:3 * na] = w0 * w
    out[3 * na:4 * na] = ptie
    out[4 * na:] = (setpoint - p) / tau


def rk4_interval(x, h, n_sub, two_h, damp, inv_rg, t_r, f_h, db, pref, lap, w0,
                 ibr_area, tau, setpoint, pu_half):
    """Advance ``x`` in place by ``n_sub`` RK4 steps of size ``h``.

    ``pu_half`` has shape ``(2 * n_sub + 1, na)``: the area disturbances at
    every half-step node. Returns ``False`` if the state became non-finite.
    """
    na = two_h.shape[0]
    nk = tau.shape[0]
    k1 = np.empty_like(x)
    k2 = np.empty_like(x)
    k3 = np.empty_like(x)
    k4 = np.empty_like(x)
    args = (na, nk, two_h, damp, inv_rg, t_r, f_h, db, pref, lap, w0, ibr_area, tau, setpoint)
    for s in range(n_sub):
        pa, pm, pb = pu_half[2 * s], pu_half[2 * s + 1], pu_half[2 * s + 2]
        _deriv(x, k1, *args, pa)
        _deriv(x + 0.5 * h * k1, k2, *args, pm)
        _deriv(x + 0.5 * h * k2, k3, *args, pm)
        _deriv(x + h * k3, k4, *args, pb)
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return bool(np.all(np.isfinite(x)))
