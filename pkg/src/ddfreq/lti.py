"""Discrete-time LTI systems with a disturbance channel.

Used as the ground truth for tests, as the data generator for exact
trajectories, and as the parametric model behind the model-based observer
baseline.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, MarginallyStable

STABILITY_TOL = 1e-10
RANK_RTOL = 1e-8


def _as_matrix(a, name):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.ndim != 2:
        raise DimensionError(f"{name} must be a matrix, got shape {a.shape}")
    return a


def _input_matrix(a, name, n):
    """``n``-row input matrix; a flat vector of length ``n`` is read as a column."""
    a = np.asarray(a, dtype=float)
    if a.ndim <= 1 and a.size == n:
        return a.reshape(n, 1)
    a = _as_matrix(a, name)
    if a.shape[0] != n:
        raise DimensionError(f"{name} has {a.shape[0]} rows, expected {n}")
    return a


@dataclass(frozen=True)
class Signal:
    """Uniformly sampled multichannel signal, one row per time step."""

    samples: np.ndarray
    period: float = 1.0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2 or s.shape[0] < 1:
            raise DimensionError(f"signal needs at least one sample, got shape {s.shape}")
        if not self.period > 0:
            raise ValueError("period must be positive")
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def width(self):
        return self.samples.shape[1]


@dataclass(frozen=True)
class LtiSystem:
    """``x+ = A x + B u + B_d d``,  ``y = C x + D u + D_d d``.

    ``D_d`` defaults to zero. It is only non-zero for sampled models whose
    output is read at the end of the hold interval, where the disturbance acts
    on the same sample it is reported for.
    """

    A: np.ndarray
    B: np.ndarray
    B_d: np.ndarray
    C: np.ndarray
    D: np.ndarray = None
    D_d: np.ndarray = None
    stable: bool = field(default=False)

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionError(f"A must be square, got {A.shape}")
        B = _input_matrix(self.B, "B", n)
        B_d = _input_matrix(self.B_d, "B_d", n)
        C = _as_matrix(self.C, "C")
        if C.shape[1] != n:
            raise DimensionError(f"C has {C.shape[1]} columns, expected {n}")
        p, m, q = C.shape[0], B.shape[1], B_d.shape[1]
        D = np.zeros((p, m)) if self.D is None else _as_matrix(self.D, "D")
        D_d = np.zeros((p, q)) if self.D_d is None else _as_matrix(self.D_d, "D_d")
        if D.shape != (p, m):
            raise DimensionError(f"D has shape {D.shape}, expected {(p, m)}")
        if D_d.shape != (p, q):
            raise DimensionError(f"D_d has shape {D_d.shape}, expected {(p, q)}")
        for name, val in (("A", A), ("B", B), ("B_d", B_d), ("C", C), ("D", D), ("D_d", D_d)):
            object.__setattr__(self, name, val)
        if self.stable and spectral_radius(A) >= 1 - STABILITY_TOL:
            raise ValueError(f"system tagged stable has spectral radius {spectral_radius(A):.6g}")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def q(self):
        return self.B_d.shape[1]

    @property
    def p(self):
        return self.C.shape[0]


def spectral_radius(M):
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def random_stable_system(n, m=1, q=1, p=1, seed=None, radius=None):
    """Seeded random system with spectral radius in [0.5, 0.9] and ``D = 0``."""
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1.0, 1.0, size=(n, n))
    rho = spectral_radius(A)
    if radius is None:
        radius = rng.uniform(0.5, 0.9)
    A *= radius / rho
    B = rng.standard_normal((n, m))
    B_d = rng.standard_normal((n, q))
    C = rng.standard_normal((p, n))
    return LtiSystem(A, B, B_d, C, stable=True)


def simulate_lti(sys, x0, u, d):
    """Forward recursion from ``x0``.

    Returns ``(y, x)`` where ``x`` holds the state at the start of every step,
    so ``x.samples[0] == x0``.
    """
    u = u if isinstance(u, Signal) else Signal(u)
    d = d if isinstance(d, Signal) else Signal(d)
    if len(u) != len(d):
        raise DimensionError(f"u has {len(u)} samples but d has {len(d)}")
    if u.period != d.period:
        raise DimensionError("u and d have different sample periods")
    if u.width != sys.m:
        raise DimensionError(f"u has width {u.width}, system expects m={sys.m}")
    if d.width != sys.q:
        raise DimensionError(f"d has width {d.width}, system expects q={sys.q}")
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.shape[0] != sys.n:
        raise DimensionError(f"x0 has dimension {x.shape[0]}, expected n={sys.n}")

    T = len(u)
    xs = np.empty((T, sys.n))
    ys = np.empty((T, sys.p))
    U, Dd = u.samples, d.samples
    for t in range(T):
        xs[t] = x
        ys[t] = sys.C @ x + sys.D @ U[t] + sys.D_d @ Dd[t]
        x = sys.A @ x + sys.B @ U[t] + sys.B_d @ Dd[t]
    return Signal(ys, u.period), Signal(xs, u.period)


def dc_gain_analytic(sys):
    """Steady-state gain from ``d`` to ``y``: ``C (I - A)^-1 B_d + D_d``."""
    I_A = np.eye(sys.n) - sys.A
    if np.linalg.cond(I_A) > 1 / np.finfo(float).eps:
        raise MarginallyStable("I - A is singular")
    return sys.C @ np.linalg.solve(I_A, sys.B_d) + sys.D_d


def has_full_column_rank(G, rtol=RANK_RTOL):
    s = np.linalg.svd(np.atleast_2d(G), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return False
    return bool(np.sum(s > rtol * s[0]) == G.shape[1])


def augmented_matrix(sys, gain, eps):
    """Error dynamics matrix of the disturbance observer.

    ``[[A, B_d], [-eps L C, I - eps L D_d]]``; the lower-right block is the
    identity whenever ``D_d = 0``.
    """
    L = np.atleast_2d(np.asarray(gain, dtype=float))
    if L.shape != (sys.q, sys.p):
        raise DimensionError(f"gain has shape {L.shape}, expected {(sys.q, sys.p)}")
    top = np.hstack([sys.A, sys.B_d])
    bottom = np.hstack([-eps * L @ sys.C, np.eye(sys.q) - eps * L @ sys.D_d])
    return np.vstack([top, bottom])


def stable_eps_grid(sys, gain, grid=None):
    """Return the grid points for which the observer error dynamics are Schur."""
    if grid is None:
        grid = np.logspace(-3, np.log10(0.5), 40)
    rho = np.array([spectral_radius(augmented_matrix(sys, gain, e)) for e in grid])
    return np.asarray(grid)[rho < 1.0], rho


def locate_eps_threshold(sys, gain, hi=2.0, tol=1e-8):
    """Bisect for the first eps where the error dynamics stop being Schur.

    Assumes stability for small eps (which holds when ``L G(1) = I``).
    """
    def unstable(e):
        return spectral_radius(augmented_matrix(sys, gain, e)) >= 1.0

    lo = 0.0
    if not unstable(hi):
        return np.inf
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if unstable(mid):
            hi = mid
        else:
            lo = mid
    return lo


class ModelBasedObserver:
    """Luenberger disturbance observer on a known (possibly wrong) model.

    Mirrors the augmented form ``x̂+ = A x̂ + B u + B_d d̂``,
    ``d̂+ = d̂ - eps L (ŷ - y)``.
    """

    def __init__(self, sys, eps, gain=None, x0=None, d0=None):
        self.sys = sys
        self.eps = float(eps)
        if gain is None:
            gain = np.linalg.pinv(dc_gain_analytic(sys))
        self.gain = np.atleast_2d(np.asarray(gain, dtype=float))
        if self.gain.shape != (sys.q, sys.p):
            raise DimensionError(f"gain has shape {self.gain.shape}, expected {(sys.q, sys.p)}")
        self.x_hat = np.zeros(sys.n) if x0 is None else np.asarray(x0, dtype=float).copy()
        self.d_hat = np.zeros(sys.q) if d0 is None else np.atleast_1d(np.asarray(d0, dtype=float)).copy()

    def step(self, u, y):
        """Consume ``u(t), y(t)``; return ``(d̂(t+1), x̂(t+1))``."""
        s = self.sys
        u = np.atleast_1d(np.asarray(u, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        y_hat = s.C @ self.x_hat + s.D @ u + s.D_d @ self.d_hat
        x_next = s.A @ self.x_hat + s.B @ u + s.B_d @ self.d_hat
        d_next = self.d_hat - self.eps * self.gain @ (y_hat - y)
        self.x_hat, self.d_hat = x_next, d_next
        return d_next.copy(), x_next.copy()


def model_based_observer_step(sys, obs_state, u, y, eps, gain):
    """Functional form of one observer step.

    ``obs_state`` is the stacked ``(x̂, d̂)`` vector of length ``n + q``.
    """
    z = np.asarray(obs_state, dtype=float).reshape(-1)
    if z.shape[0] != sys.n + sys.q:
        raise DimensionError(f"observer state has length {z.shape[0]}, expected {sys.n + sys.q}")
    obs = ModelBasedObserver(sys, eps, gain, x0=z[: sys.n], d0=z[sys.n:])
    return obs.step(u, y)
