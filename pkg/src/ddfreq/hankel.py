"""Hankel matrices, persistency of excitation and past/future predictor blocks."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DepthExceedsData, EmptyTruncation, InconsistentDataset
from .lti import Signal

log = logging.getLogger(__name__)

RANK_RTOL = 1e-8


def _signal(x):
    return x if isinstance(x, Signal) else Signal(x)


@dataclass(frozen=True)
class HankelMatrix:
    data: np.ndarray
    depth: int
    channel_width: int

    @property
    def shape(self):
        return self.data.shape

    def block_row(self, i):
        k = self.channel_width
        return self.data[i * k:(i + 1) * k]


def hankel_array(samples, depth):
    """Plain-array Hankel matrix of a ``T x k`` sample matrix.

    Block row ``i`` holds samples ``i .. i+cols-1``; column ``j`` is the stacked
    window ``w(j), ..., w(j+depth-1)``.
    """
    w = np.asarray(samples, dtype=float)
    if w.ndim == 1:
        w = w[:, None]
    T, k = w.shape
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if depth > T:
        raise DepthExceedsData(f"depth {depth} exceeds {T} samples")
    cols = T - depth + 1
    # windows[j, i, :] = w[j + i]
    windows = np.lib.stride_tricks.sliding_window_view(w, depth, axis=0)  # (cols, k, depth)
    return np.ascontiguousarray(windows.transpose(2, 1, 0).reshape(depth * k, cols))


def hankel(signal, depth):
    s = _signal(signal)
    return HankelMatrix(hankel_array(s.samples, depth), depth, s.width)


def numerical_rank(s, rtol=RANK_RTOL):
    s = np.asarray(s)
    if s.size == 0 or s[0] <= 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def is_persistently_exciting(signal, order, rtol=RANK_RTOL):
    """Check full row rank of the depth-``order`` Hankel matrix.

    Returns ``(ok, smallest singular value)``. Too-short records return
    ``(False, 0.0)``.
    """
    s = _signal(signal)
    k = s.width
    T = len(s)
    if order > T or T - order + 1 < k * order:
        log.debug("signal too short for order %d: T=%d, k=%d", order, T, k)
        return False, 0.0
    sv = np.linalg.svd(hankel_array(s.samples, order), compute_uv=False)
    return numerical_rank(sv, rtol) == k * order, float(sv[-1])


def pinv_svd(U, s, Vt, rank):
    """Pseudoinverse from a (thin) SVD keeping the leading ``rank`` triplets."""
    r = int(rank)
    return (Vt[:r].T / s[:r]) @ U[:, :r].T


@dataclass(frozen=True)
class PredictorBlocks:
    """Past/future partition of depth ``T_ini + 1`` Hankel matrices.

    When the dataset has no separate disturbance record (``lumped``), the
    disturbance blocks have zero rows and the disturbance is assumed to enter
    through the input channel. Blocks are stored in scaled units:
    every channel of the raw data was divided by the matching entry of
    ``u_scale``/``d_scale``/``y_scale`` (all ones unless normalisation was
    requested).
    """

    U_p: np.ndarray
    D_p: np.ndarray
    Y_p: np.ndarray
    U_f: np.ndarray
    D_f: np.ndarray
    Y_f: np.ndarray
    T_ini: int
    prediction_matrix: np.ndarray
    truncation_rank: int | None = None
    u_scale: np.ndarray = None
    d_scale: np.ndarray = None
    y_scale: np.ndarray = None
    _svd: tuple = field(default=None, repr=False, compare=False)

    @property
    def lumped(self):
        return self.D_p.shape[0] == 0

    @property
    def m(self):
        return self.U_f.shape[0]

    @property
    def q(self):
        return self.D_f.shape[0] if not self.lumped else self.m

    @property
    def p(self):
        return self.Y_f.shape[0]

    @property
    def columns(self):
        return self.U_p.shape[1]

    @property
    def H_red(self):
        return np.vstack([self.U_p, self.D_p, self.Y_p, self.U_f, self.D_f])

    @property
    def svd(self):
        return self._svd

    @property
    def rank(self):
        return numerical_rank(self._svd[1])


def _scales(samples, normalize):
    if not normalize:
        return np.ones(samples.shape[1])
    rms = np.sqrt(np.mean(samples**2, axis=0))
    return np.where(rms > 0, rms, 1.0)


def partition(u_data, d_data, y_data, T_ini, normalize=False):
    """Build the predictor blocks for window length ``T_ini``.

    ``d_data`` may be ``None`` for lumped-channel datasets. The prediction
    matrix ``Y_f pinv(H_red)`` is computed once here.
    """
    u = _signal(u_data)
    y = _signal(y_data)
    d = None if d_data is None else _signal(d_data)
    T = len(u)
    if len(y) != T or (d is not None and len(d) != T):
        lens = (len(u), None if d is None else len(d), len(y))
        raise InconsistentDataset(f"signal lengths differ (u, d, y) = {lens}")
    T_ini = int(T_ini)
    if T_ini < 1:
        raise ValueError("T_ini must be at least 1")
    if T - T_ini < 1:
        raise DepthExceedsData(f"T_ini={T_ini} leaves no future row with T={T}")

    L = T_ini + 1
    su = _scales(u.samples, normalize)
    sy = _scales(y.samples, normalize)
    Hu = hankel_array(u.samples / su, L)
    Hy = hankel_array(y.samples / sy, L)
    m, p = u.width, y.width
    if d is None:
        sd = su.copy()
        Hd = np.zeros((0, Hu.shape[1]))
        q = 0
    else:
        sd = _scales(d.samples, normalize)
        Hd = hankel_array(d.samples / sd, L)
        q = d.width
    U_p, U_f = Hu[: m * T_ini], Hu[m * T_ini:]
    D_p, D_f = Hd[: q * T_ini], Hd[q * T_ini:]
    Y_p, Y_f = Hy[: p * T_ini], Hy[p * T_ini:]

    H_red = np.vstack([U_p, D_p, Y_p, U_f, D_f])
    U, s, Vt = np.linalg.svd(H_red, full_matrices=False)
    P = Y_f @ pinv_svd(U, s, Vt, numerical_rank(s))
    return PredictorBlocks(U_p, D_p, Y_p, U_f, D_f, Y_f, T_ini, P, None, su, sd, sy, (U, s, Vt))


def energy_rank(s, fraction):
    """Smallest rank whose squared singular values reach ``fraction`` of the total."""
    e = np.cumsum(np.asarray(s) ** 2)
    if e[-1] == 0:
        return 0
    return int(np.searchsorted(e / e[-1], fraction - 1e-15) + 1)


def truncate(blocks, rank):
    """Replace the prediction matrix by one built from a rank-``r`` SVD of ``H_red``.

    ``rank`` is either an integer rank or a float energy fraction in (0, 1].
    """
    U, s, Vt = blocks.svd
    if isinstance(rank, (float, np.floating)):
        if not 0 < rank <= 1:
            raise ValueError(f"energy fraction must be in (0, 1], got {rank}")
        r = energy_rank(s, float(rank))
    else:
        r = int(rank)
    if r <= 0:
        raise EmptyTruncation("truncation would keep no singular values")
    if r > s.size:
        raise ValueError(f"rank {r} exceeds the {s.size} available singular values")
    r = min(r, numerical_rank(s))
    P = blocks.Y_f @ pinv_svd(U, s, Vt, r)
    return replace(blocks, prediction_matrix=P, truncation_rank=r)


def span_residual(H, w):
    """Least-squares residual of ``H g = w`` relative to ``|w|``."""
    g, *_ = np.linalg.lstsq(H, w, rcond=None)
    r = np.linalg.norm(H @ g - w)
    return r / max(np.linalg.norm(w), 1e-300)
