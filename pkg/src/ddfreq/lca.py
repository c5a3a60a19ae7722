"""Frequency-control specialisation of the estimators and IBR redispatch.

All quantities are per-unit on the area base; frequency deviation is in
per-unit of nominal frequency.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .estimators import (DEFAULT_EPS, DEFAULT_LAMBDA1, DEFAULT_LAMBDA2, DEFAULT_T_INI,
                         LinearDisturbanceEstimator, RegularizedDisturbanceEstimator,
                         build_blocks)
from .lti import LtiSystem, ModelBasedObserver, dc_gain_analytic


@dataclass(frozen=True)
class LcaMeasurement:
    delta_f: float      # p.u. frequency deviation at the end of the hold interval
    delta_p_tie: float  # p.u. net tie flow out of the area (interval average)
    delta_p_ibr: float  # p.u. sum of IBR setpoint deviations held over the interval
    k: int = 0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.delta_f, self.delta_p_tie, self.delta_p_ibr)):
            raise ValueError(f"non-finite measurement at sample {self.k}")


def aggregate_input(m, d_hat_u):
    """Lumped input ``dP_ibr - dP_tie - dP_u_hat``."""
    return m.delta_p_ibr - m.delta_p_tie - float(np.asarray(d_hat_u).reshape(-1)[0])


def measured_input(m):
    return m.delta_p_ibr - m.delta_p_tie


class LddeArea:
    """Linear data-driven estimator on one area's lumped record."""

    name = "ldde"

    def __init__(self, dataset, T_ini=DEFAULT_T_INI, eps=DEFAULT_EPS, gain=None, truncation="auto"):
        self.blocks = build_blocks(dataset, T_ini, truncation=truncation)
        self.est = LinearDisturbanceEstimator(self.blocks, eps=eps, gain=gain)

    def step(self, m):
        return float(self.est.step(measured_input(m), m.delta_f)[0])


class OddeArea:
    """Regularized data-driven estimator on one area's lumped record."""

    name = "odde"

    def __init__(self, dataset, T_ini=DEFAULT_T_INI, lambda1=DEFAULT_LAMBDA1,
                 lambda2=DEFAULT_LAMBDA2, solver_tol=1e-9, max_iters=5000, smooth_l2=False,
                 freq_sigma=None):
        self.blocks = build_blocks(dataset, T_ini, truncation=None)
        self.est = RegularizedDisturbanceEstimator(
            self.blocks, lambda1, lambda2, solver_tol=solver_tol, max_iters=max_iters,
            smooth_l2=smooth_l2, fit_scale=freq_sigma or None)
        self.certificates = []

    def step(self, m):
        r = self.est.step(measured_input(m), m.delta_f)
        if r.certificate is not None:
            self.certificates.append(r.certificate)
        return float(r.d_hat[0])


def area_model(area, dt, f0=60.0, H_scale=1.0, T_R_scale=1.0, R_scale=1.0):
    """Sampled linear model of one area for the model-based observer.

    Continuous states ``(w, xi)`` with a linear governor (no deadband), no IBR
    lag, lumped input ``v = dP_ibr - dP_tie - dP_u``; zero-order hold over
    ``dt`` and the output read at the end of the interval, so
    ``y(k) = C x(k+1)``. The scale factors introduce parameter mismatch.
    """
    two_h = 2.0 * area.H * H_scale
    inv_ri = 1.0 / (area.R_I * R_scale)
    inv_rg = area.inv_R_g / R_scale
    t_r = area.T_R * T_R_scale
    fh = area.F_H
    Ac = np.array([[-(inv_ri + fh * inv_rg) / two_h, 1.0 / two_h],
                   [-(1.0 - fh) * inv_rg / t_r, -1.0 / t_r]])
    Bc = np.array([[1.0 / two_h], [0.0]])
    n = 2
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = Ac
    M[:n, n:] = Bc
    E = expm(M * dt)
    Ad, Bz = E[:n, :n], E[:n, n:]
    C = np.array([[1.0, 0.0]])
    return LtiSystem(Ad, Bz, -Bz, C @ Ad, C @ Bz, -(C @ Bz), stable=True)


class ModelBasedArea:
    """Luenberger disturbance observer on the aggregate area model."""

    name = "model_based"

    def __init__(self, area, dt, eps=DEFAULT_EPS, f0=60.0, mismatch=None):
        mismatch = mismatch or {}
        self.sys = area_model(area, dt, f0, **mismatch)
        self.obs = ModelBasedObserver(self.sys, eps, np.linalg.pinv(dc_gain_analytic(self.sys)))

    def step(self, m):
        d_next, _ = self.obs.step([measured_input(m)], [m.delta_f])
        return float(d_next[0])


def lca_estimate_step(area_est, m):
    """Imbalance estimate after consuming one measurement."""
    return area_est.step(m)


@dataclass
class Allocation:
    deltas: np.ndarray
    remainder: float

    @property
    def total(self):
        return float(np.sum(self.deltas))


def allocate(d_hat_u, ibrs):
    """Split ``d_hat_u`` over the units in proportion to headroom.

    Headroom is measured from each unit's ``current_setpoint`` towards
    ``p_max`` (positive request) or ``p_min`` (negative request). Anything
    beyond the aggregate headroom is returned as ``remainder``.
    """
    d = float(d_hat_u)
    if not math.isfinite(d):
        raise ValueError("imbalance estimate must be finite")
    n = len(ibrs)
    deltas = np.zeros(n)
    if d == 0.0 or n == 0:
        return Allocation(deltas, d)
    if d > 0:
        room = np.array([max(u.p_max - u.current_setpoint, 0.0) for u in ibrs])
    else:
        room = np.array([max(u.current_setpoint - u.p_min, 0.0) for u in ibrs])
    total = room.sum()
    if total <= 0.0:
        return Allocation(deltas, d)
    served = min(abs(d), total)
    deltas = math.copysign(1.0, d) * served * room / total
    return Allocation(deltas, d - float(deltas.sum()))
