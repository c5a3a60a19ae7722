"""Inner solver for the regularized disturbance estimator.

Solves, for fixed data blocks,

    minimize   |y - Y_f g|^2 + lam1 |(I - Q) g|^2 + lam2 |g|_2
    subject to F g = f

where ``F`` stacks the rows that are pinned by recent history. The equality
constraints are removed with ``g = g0 + N z`` (``g0`` the minimum-norm
particular solution, ``N`` an orthonormal null-space basis of ``F``). Because
``g0`` is orthogonal to ``range(N)``, ``|g| = sqrt(|g0|^2 + |z|^2)`` and the
reduced problem is

    minimize   1/2 z'Hz - b'z + lam2 sqrt(c^2 + |z|^2)

with ``H`` fixed for a given dataset. Stationarity reads ``(H + mu I) z = b``
with ``mu = lam2 / sqrt(c^2 + |z|^2)``; in the eigenbasis of ``H`` this is a
scalar monotone equation in ``mu`` (the default ``"spectral"`` method).
``"fista"`` runs monotone accelerated proximal gradient on the same reduced
problem using the exact prox of the norm term.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import InfeasibleInitialization
from .hankel import RANK_RTOL, numerical_rank


@dataclass
class Certificate:
    constraint_residual: float
    optimality_residual: float
    iterations: int
    converged: bool
    objective: float

    @property
    def status(self):
        return "ok" if self.converged else "NotConverged"


@dataclass
class RegularizedSolution:
    g: np.ndarray
    objective: float
    certificate: Certificate


class RegularizedProblem:
    """Data-dependent part of the regularized estimator, factored once.

    Parameters
    ----------
    F : (r, N) array
        Rows pinned by the constraint.
    Y_f : (p, N) array
        Output rows whose value is fitted to the measurement.
    H_red : (k, N) array
        Matrix whose row-space projector defines ``Q``.
    lambda1, lambda2 : float
        Penalty weights.
    smooth_l2 : bool
        Use ``lam2 |g|^2`` instead of ``lam2 |g|`` (ablation only).
    """

    def __init__(self, F, Y_f, H_red, lambda1, lambda2, smooth_l2=False,
                 feas_tol=1e-6):
        if lambda1 < 0 or lambda2 < 0:
            raise ValueError("lambda1 and lambda2 must be nonnegative")
        self.F = np.asarray(F, dtype=float)
        self.Y_f = np.asarray(Y_f, dtype=float)
        self.lambda1 = float(lambda1)
        self.lambda2 = float(lambda2)
        self.smooth_l2 = bool(smooth_l2)
        self.feas_tol = feas_tol
        ncol = self.F.shape[1]

        # Q = pinv(H_red) H_red: projector onto the row space of H_red
        _, sh, Vh = np.linalg.svd(H_red, full_matrices=False)
        Vr = Vh[: numerical_rank(sh)]
        self.row_basis = Vr
        self.Q = Vr.T @ Vr

        Uf, sf, Vf = np.linalg.svd(self.F, full_matrices=True)
        rf = numerical_rank(sf)
        self.F_rank = rf
        self.F_pinv = (Vf[:rf].T / sf[:rf]) @ Uf[:, :rf].T
        self.N = Vf[rf:].T  # orthonormal null-space basis, (ncol, ncol - rf)

        self.A = self.Y_f @ self.N
        self.B = self.N - Vr.T @ (Vr @ self.N)  # (I - Q) N
        H = 2.0 * (self.A.T @ self.A + self.lambda1 * (self.B.T @ self.B))
        self.H = 0.5 * (H + H.T)
        h, V = np.linalg.eigh(self.H)
        self.h = np.clip(h, 0.0, None)
        self.V = V
        self.h_max = float(self.h[-1]) if self.h.size else 0.0
        self.ncol = ncol

    # --- pieces -----------------------------------------------------------
    def particular(self, f):
        f = np.asarray(f, dtype=float)
        g0 = self.F_pinv @ f
        res = np.linalg.norm(self.F @ g0 - f)
        scale = max(np.linalg.norm(f), 1.0)
        if res > self.feas_tol * scale:
            raise InfeasibleInitialization(
                f"pinned rows inconsistent with the data (residual {res:.3e})")
        return g0, res / scale

    def objective(self, g, y):
        g = np.asarray(g, dtype=float)
        fit = np.sum((np.atleast_1d(y) - self.Y_f @ g) ** 2)
        out = g - self.Q @ g
        reg = self.lambda1 * np.sum(out**2)
        ng = np.linalg.norm(g)
        return float(fit + reg + self.lambda2 * (ng**2 if self.smooth_l2 else ng))

    def reduced_terms(self, g0, y):
        r = np.atleast_1d(np.asarray(y, dtype=float)) - self.Y_f @ g0
        c0 = g0 - self.Q @ g0
        b = 2.0 * (self.A.T @ r - self.lambda1 * (self.B.T @ c0))
        return b, float(np.linalg.norm(g0))

    def reduced_gradient(self, z, b, c):
        grad = self.H @ z - b
        if self.smooth_l2:
            return grad + 2.0 * self.lambda2 * z
        nrm = np.sqrt(c * c + z @ z)
        if nrm > 0:
            return grad + self.lambda2 * z / nrm
        # min-norm element of the subdifferential at z = 0 with c = 0
        gn = np.linalg.norm(grad)
        return grad * max(0.0, gn - self.lambda2) / gn if gn > 0 else grad

    def optimality_residual(self, z, b, c):
        """Minimal-norm subgradient, relative to the size of the terms."""
        r = np.linalg.norm(self.reduced_gradient(z, b, c))
        scale = np.linalg.norm(self.H @ z) + np.linalg.norm(b) + self.lambda2 + 1e-300
        return float(r / scale)

    # --- solvers ----------------------------------------------------------
    def solve(self, f, y, tol=1e-9, max_iters=5000, method="spectral"):
        g0, cres = self.particular(f)
        if self.N.shape[1] == 0:
            z = np.zeros(0)
            b, c = np.zeros(0), float(np.linalg.norm(g0))
            iters = 0
        else:
            b, c = self.reduced_terms(g0, y)
            if method == "spectral":
                z, iters = self._solve_spectral(b, c, tol, max_iters)
            elif method == "fista":
                z, iters = self._solve_fista(b, c, tol, max_iters)
            else:
                raise ValueError(f"unknown method {method!r}")
        g = g0 + self.N @ z
        opt = self.optimality_residual(z, b, c) if z.size else 0.0
        obj = self.objective(g, y)
        cert = Certificate(cres, opt, iters, bool(opt < tol and iters <= max_iters), obj)
        return RegularizedSolution(g, obj, cert)

    def _solve_spectral(self, b, c, tol, max_iters):
        bp = self.V.T @ b
        if self.smooth_l2 or self.lambda2 == 0.0:
            mu = 2.0 * self.lambda2 if self.smooth_l2 else 0.0
            denom = self.h + mu
            keep = denom > RANK_RTOL * max(self.h_max, 1e-300)
            zp = np.where(keep, bp / np.where(keep, denom, 1.0), 0.0)
            return self.V @ zp, 1
        mu, iters = _backend.secular_root(self.h, bp, c, self.lambda2, max_iters)
        if mu == 0.0:
            return np.zeros_like(b), iters
        return self.V @ (bp / (self.h + mu)), iters

    def _solve_fista(self, b, c, tol, max_iters):
        Lc = self.h_max + (2.0 * self.lambda2 if self.smooth_l2 else 0.0)
        if Lc <= 0:
            Lc = 1.0
        step = 1.0 / Lc
        z = np.zeros_like(b)
        w = z.copy()
        tk = 1.0
        F_prev = self._reduced_objective(z, b, c)
        it = 0
        for it in range(1, max_iters + 1):
            v = w - step * (self.H @ w - b)
            cand = self._prox(v, step, c)
            F_c = self._reduced_objective(cand, b, c)
            # monotone variant: keep the better of candidate and previous iterate
            z_new = cand if F_c <= F_prev else z
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
            w = z_new + (tk / t_new) * (cand - z_new) + ((tk - 1.0) / t_new) * (z_new - z)
            if F_c > F_prev:
                t_new = 1.0  # restart momentum
                w = z_new.copy()
            z, tk, F_prev = z_new, t_new, min(F_c, F_prev)
            if self.optimality_residual(z, b, c) < tol:
                break
        return z, it

    def _reduced_objective(self, z, b, c):
        nz = z @ z
        pen = self.lambda2 * ((c * c + nz) if self.smooth_l2 else np.sqrt(c * c + nz))
        return 0.5 * z @ (self.H @ z) - b @ z + pen

    def _prox(self, v, step, c):
        """prox of ``step * lam2 * sqrt(c^2 + |z|^2)`` (or its squared variant)."""
        t = step * self.lambda2
        if self.smooth_l2:
            return v / (1.0 + 2.0 * t)
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return v
        if c == 0.0:
            return v * max(0.0, 1.0 - t / nv)
        # radius a solves a - nv + t a / sqrt(c^2 + a^2) = 0, a in [0, nv]
        lo, hi = 0.0, nv
        for _ in range(200):
            a = 0.5 * (lo + hi)
            if a - nv + t * a / np.sqrt(c * c + a * a) > 0:
                hi = a
            else:
                lo = a
            if hi - lo <= 1e-16 * nv:
                break
        return v * (0.5 * (lo + hi) / nv)
