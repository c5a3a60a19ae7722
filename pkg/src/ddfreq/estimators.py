"""Data-driven disturbance estimators.

Two designs share the same Hankel predictor blocks:

* :class:`LinearDisturbanceEstimator` predicts the output with the cached
  prediction matrix and corrects the disturbance estimate with a scalar-tuned
  linear update (LDDE).
* :class:`RegularizedDisturbanceEstimator` picks the prediction and the
  disturbance estimate jointly by solving a small regularized convex program
  every sample (ODDE).

In lumped mode (``blocks.lumped``) the dataset has no separate disturbance
record; the disturbance is taken to enter through the input channel with a
negative sign, i.e. the effective input is ``u - d``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DcGainIdentificationFailed, DimensionError
from .hankel import energy_rank, partition, truncate
from .regularized import RegularizedProblem

DEFAULT_T_INI = 7
DEFAULT_EPS = 0.2
DEFAULT_LAMBDA1 = 1e8
DEFAULT_LAMBDA2 = 1e2
NOISY_ENERGY = 0.9999


class EstimatorState:
    """Ring buffers of the last ``T_ini`` inputs, estimates and outputs."""

    def __init__(self, T_ini, m, q, p):
        self.T_ini = int(T_ini)
        self.u_ini = np.zeros((self.T_ini, m))
        self.d_hat_ini = np.zeros((self.T_ini, q))
        self.y_ini = np.zeros((self.T_ini, p))
        self.d_hat = np.zeros(q)
        self.count = 0

    @property
    def warm(self):
        return self.count >= self.T_ini

    def push(self, u, d_hat, y):
        for buf, val in ((self.u_ini, u), (self.d_hat_ini, d_hat), (self.y_ini, y)):
            buf[:-1] = buf[1:]
            buf[-1] = val
        self.count += 1


def _vec(x, n, name):
    v = np.atleast_1d(np.asarray(x, dtype=float)).reshape(-1)
    if v.shape[0] != n:
        raise DimensionError(f"{name} has length {v.shape[0]}, expected {n}")
    return v


def build_blocks(dataset, T_ini=DEFAULT_T_INI, truncation="auto", normalize=None):
    """Partition a dataset, normalising and truncating noisy records by default."""
    if normalize is None:
        normalize = dataset.noisy
    blocks = partition(dataset.u, dataset.d, dataset.y, T_ini, normalize=normalize)
    if truncation == "auto":
        truncation = NOISY_ENERGY if dataset.noisy else None
    if truncation is not None:
        blocks = truncate(blocks, truncation)
    return blocks


def dc_gain_from_blocks(blocks, rank=None, tol=1e-6):
    """Identify the disturbance-to-output DC gain from the stored Hankel data.

    For each disturbance channel ``i``, find a depth-``T_ini + 1`` trajectory
    with zero input, disturbance ``e_i`` and an output that is constant over
    the whole window; the constant is column ``i`` of the gain. ``rank``
    (int or energy fraction) replaces the stacked Hankel matrix by a
    low-rank approximation first, which is needed for noisy data.
    """
    L = blocks.T_ini + 1
    m, p = blocks.m, blocks.p
    Hu = np.vstack([blocks.U_p, blocks.U_f])
    Hd = np.vstack([blocks.D_p, blocks.D_f])
    Hy = np.vstack([blocks.Y_p, blocks.Y_f])
    H = np.vstack([Hu, Hd, Hy])
    if rank is not None:
        U, s, Vt = np.linalg.svd(H, full_matrices=False)
        r = energy_rank(s, float(rank)) if isinstance(rank, float) else int(rank)
        H = (U[:, :r] * s[:r]) @ Vt[:r]
        Hu, Hd, Hy = H[: Hu.shape[0]], H[Hu.shape[0]: Hu.shape[0] + Hd.shape[0]], H[Hu.shape[0] + Hd.shape[0]:]
    q = blocks.q
    ncol = H.shape[1]
    ones_y = np.kron(np.ones((L, 1)), np.eye(p))
    G = np.empty((p, q))
    for i in range(q):
        e = np.zeros(q)
        e[i] = 1.0
        if blocks.lumped:
            M = np.block([[Hu, np.zeros((Hu.shape[0], p))], [Hy, -ones_y]])
            rhs = np.concatenate([np.tile(-e, L), np.zeros(L * p)])
        else:
            M = np.block([[Hu, np.zeros((Hu.shape[0], p))],
                          [Hd, np.zeros((Hd.shape[0], p))],
                          [Hy, -ones_y]])
            rhs = np.concatenate([np.zeros(L * m), np.tile(e, L), np.zeros(L * p)])
        sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        res = np.linalg.norm(M @ sol - rhs) / np.linalg.norm(rhs)
        if rank is None and res > tol:
            raise DcGainIdentificationFailed(
                f"no constant trajectory for disturbance channel {i} (residual {res:.2e})")
        if np.linalg.norm(sol[:ncol]) == 0:
            raise DcGainIdentificationFailed(f"degenerate solution for channel {i}")
        G[:, i] = sol[ncol:] * blocks.y_scale / blocks.d_scale[i]
    return G


def dc_gain_from_data(dataset, T_ini=DEFAULT_T_INI, rank="auto"):
    blocks = build_blocks(dataset, T_ini, truncation=None)
    if rank == "auto":
        rank = NOISY_ENERGY if dataset.noisy else None
    return dc_gain_from_blocks(blocks, rank=rank)


class _Base:
    def __init__(self, blocks):
        self.blocks = blocks
        self.T_ini = blocks.T_ini
        self.m, self.q, self.p = blocks.m, blocks.q, blocks.p
        self.state = EstimatorState(self.T_ini, self.m, self.q, self.p)

    @property
    def d_hat(self):
        return self.state.d_hat.copy()

    def reset(self):
        self.state = EstimatorState(self.T_ini, self.m, self.q, self.p)

    def _effective_input(self, u, d_hat):
        return u - d_hat if self.blocks.lumped else u


class LinearDisturbanceEstimator(_Base):
    """Prediction-matrix output predictor plus linear disturbance update.

    Parameters
    ----------
    blocks : PredictorBlocks
    eps : float
        Update rate in (0, 1).
    gain : array, optional
        ``q x p`` estimator gain. Defaults to the pseudoinverse of the DC gain
        identified from the same blocks.
    """

    def __init__(self, blocks, eps=DEFAULT_EPS, gain=None, dc_gain_rank="auto"):
        super().__init__(blocks)
        if not 0 < eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {eps}")
        self.eps = float(eps)
        if gain is None:
            if dc_gain_rank == "auto":
                dc_gain_rank = NOISY_ENERGY if blocks.truncation_rank is not None else None
            gain = np.linalg.pinv(dc_gain_from_blocks(blocks, rank=dc_gain_rank))
        self.gain = np.atleast_2d(np.asarray(gain, dtype=float))
        if self.gain.shape != (self.q, self.p):
            raise DimensionError(f"gain has shape {self.gain.shape}, expected {(self.q, self.p)}")
        b = blocks
        T = self.T_ini
        reg_scale = np.concatenate([
            np.tile(b.u_scale, T), np.tile(b.d_scale, T) if not b.lumped else np.zeros(0),
            np.tile(b.y_scale, T), b.u_scale, b.d_scale if not b.lumped else np.zeros(0)])
        self.P = (b.y_scale[:, None] * b.prediction_matrix) / reg_scale[None, :]
        self.y_hat = None

    def regressor(self, u_eff):
        s = self.state
        parts = [s.u_ini.ravel()]
        if not self.blocks.lumped:
            parts.append(s.d_hat_ini.ravel())
        parts.append(s.y_ini.ravel())
        parts.append(u_eff)
        if not self.blocks.lumped:
            parts.append(s.d_hat)
        return np.concatenate(parts)

    def step(self, u, y):
        """Consume ``u(t), y(t)``; return ``d̂(t+1)``."""
        u = _vec(u, self.m, "u")
        y = _vec(y, self.p, "y")
        s = self.state
        d_t = s.d_hat.copy()
        u_eff = self._effective_input(u, d_t)
        if not s.warm:
            # record measured outputs in place of predictions until the window fills
            s.push(u_eff, d_t, y)
            self.y_hat = y.copy()
            return d_t
        y_hat = self.P @ self.regressor(u_eff)
        d_next = d_t - self.eps * self.gain @ (y_hat - y)
        s.push(u_eff, d_t, y_hat)
        s.d_hat = d_next
        self.y_hat = y_hat
        return d_next.copy()


def ldde_step(state, blocks, cfg, u, y):
    """Functional wrapper: run one LDDE step on an existing estimator object.

    ``cfg`` is the :class:`LinearDisturbanceEstimator` whose buffers are
    ``state``; kept for symmetry with the object API.
    """
    cfg.state = state
    return cfg.step(u, y)


@dataclass
class OddeResult:
    d_hat: np.ndarray
    y_hat: np.ndarray
    g: np.ndarray
    certificate: object


class RegularizedDisturbanceEstimator(_Base):
    """Joint prediction/estimation by a regularized convex program.

    Buffers hold measured outputs (not predictions).

    The estimate at step ``t`` is read off the fit of ``y(t)``, so the
    disturbance must reach the measured output within the same sample
    (direct feedthrough, as in the end-of-interval frequency reading).
    The recursion then acts as a one-step plant inverse and diverges if the
    disturbance-to-output channel has zeros outside the unit circle.

    Parameters
    ----------
    fit_scale : float, optional
        Output unit in which the prediction-error term is measured. Passing
        the output-noise standard deviation makes that term a whitened
        residual, so ``lambda1`` and ``lambda2`` trade regularization against
        a chi-square misfit. By default the residual is measured in units of
        the dataset's output RMS.
    """

    def __init__(self, blocks, lambda1=DEFAULT_LAMBDA1, lambda2=DEFAULT_LAMBDA2,
                 solver_tol=1e-9, max_iters=5000, method="spectral", smooth_l2=False,
                 feas_tol=1e-6, fit_scale=None):
        super().__init__(blocks)
        b = blocks
        if b.lumped:
            F = np.vstack([b.U_p, b.Y_p])
        else:
            F = np.vstack([b.U_p, b.D_p, b.Y_p, b.U_f])
        if fit_scale is None:
            self.fit_weight = np.ones(b.p)
        else:
            if not fit_scale > 0:
                raise ValueError("fit_scale must be positive")
            self.fit_weight = b.y_scale / float(fit_scale)
        # only the misfit term depends on output units; constraints and Q do not
        self.problem = RegularizedProblem(F, self.fit_weight[:, None] * b.Y_f, b.H_red,
                                          lambda1, lambda2, smooth_l2=smooth_l2,
                                          feas_tol=feas_tol)
        self.solver_tol = solver_tol
        self.max_iters = max_iters
        self.method = method
        self.last = None

    @property
    def Q(self):
        return self.problem.Q

    def fixed_rows(self, u):
        """Pinned right-hand side in the blocks' scaled units."""
        b, s = self.blocks, self.state
        parts = [(s.u_ini / b.u_scale).ravel()]
        if not b.lumped:
            parts.append((s.d_hat_ini / b.d_scale).ravel())
        parts.append((s.y_ini / b.y_scale).ravel())
        if not b.lumped:
            parts.append(u / b.u_scale)
        return np.concatenate(parts)

    def step(self, u, y):
        """Consume ``u(t), y(t)``; return an :class:`OddeResult` for time ``t``."""
        u = _vec(u, self.m, "u")
        y = _vec(y, self.p, "y")
        s, b = self.state, self.blocks
        if not s.warm:
            zero = np.zeros(self.q)
            s.push(self._effective_input(u, zero), zero, y)
            self.last = OddeResult(zero, y.copy(), None, None)
            return self.last
        sol = self.problem.solve(self.fixed_rows(u), self.fit_weight * y / b.y_scale,
                                 tol=self.solver_tol,
                                 max_iters=self.max_iters, method=self.method)
        g = sol.g
        y_hat = (b.Y_f @ g) * b.y_scale
        if b.lumped:
            d_hat = u - (b.U_f @ g) * b.u_scale
        else:
            d_hat = (b.D_f @ g) * b.d_scale
        s.push(self._effective_input(u, d_hat), d_hat, y)
        s.d_hat = d_hat
        self.last = OddeResult(d_hat.copy(), y_hat, g, sol.certificate)
        return self.last


def odde_step(state, blocks, cfg, u, y):
    cfg.state = state
    r = cfg.step(u, y)
    return r.d_hat, r.y_hat, r.certificate


def solve_regularized(blocks, fixed_rows, y, lambda1, lambda2, tol=1e-9, max_iters=5000,
                      method="spectral", smooth_l2=False):
    """One-off solve of the regularized program for given pinned rows."""
    b = blocks
    F = np.vstack([b.U_p, b.Y_p]) if b.lumped else np.vstack([b.U_p, b.D_p, b.Y_p, b.U_f])
    prob = RegularizedProblem(F, b.Y_f, b.H_red, lambda1, lambda2, smooth_l2=smooth_l2)
    sol = prob.solve(fixed_rows, y, tol=tol, max_iters=max_iters, method=method)
    return sol.g, sol.objective, sol.certificate
