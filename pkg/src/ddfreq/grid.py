"""Multi-area aggregate frequency dynamics.

Each area is one aggregate synchronous machine with a reheat-type governor
(behind a frequency deadband), a lumped primary response ``1/R_I`` standing
for IBR droop and load damping, and dispatchable IBRs following their
setpoints through a first-order lag. Areas are coupled by linearised
angle-difference tie lines.

Per-area dynamics in system-base per-unit (``w`` is the speed deviation)::

    2H w'   = -w/R_I + Pm - Pu - Ptie + Pibr
    Pm      = xi - F_H/R_g * db(w)
    T_R xi' = -xi + Pref - (1 - F_H)/R_g * db(w)
    delta'  = w0 * w
    Ptie_i  = sum_j T_ij (delta_i - delta_j)

The ``xi`` realisation removes the derivative term of the governor equation:
``Pm / db(w) = -(1 + F_H T_R s) / (R_g (1 + T_R s))``.

The controller runs every ``dt_sample``. Sample ``k`` covers the hold
interval ``[k dt, (k+1) dt)``: the IBR setpoints are constant over it, the
tie flow is its interval average and the frequency is read at its end.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _backend
from .errors import NumericalDivergence

F0 = 60.0
SYSTEM_BASE = 100.0


@dataclass
class Generator:
    name: str
    rating: float          # MVA
    output: float          # MW, pre-disturbance dispatch
    H: float = 4.0         # s, on rating
    droop: float = 0.05    # p.u. on rating
    T_R: float = 6.0       # s
    F_H: float = 0.3


@dataclass
class IbrUnit:
    """Dispatchable inverter-based resource (p.u. on the area base)."""

    id: str
    p_min: float
    p_max: float
    current_setpoint: float = 0.0
    lag_time_constant: float = 0.05

    def __post_init__(self):
        if not self.p_min <= self.current_setpoint <= self.p_max:
            raise ValueError(f"IBR {self.id}: setpoint outside [p_min, p_max]")


@dataclass
class AreaParams:
    """One control area.

    ``R_I`` lumps IBR droop and load damping (p.u. on ``base``). Inertia and
    governor aggregates are derived from the generator list.
    """

    name: str
    generators: list
    ibrs: list
    R_I: float
    deadband: float = 0.036   # Hz
    base: float = SYSTEM_BASE

    def __post_init__(self):
        if self.deadband < 0:
            raise ValueError("deadband must be nonnegative")
        if self.base <= 0:
            raise ValueError("base must be positive")

    def online(self):
        return [g for g in self.generators if g.rating > 0]

    @property
    def H(self):
        return sum(g.H * g.rating for g in self.online()) / self.base

    @property
    def inv_R_g(self):
        return sum(g.rating / g.droop for g in self.online()) / self.base

    @property
    def R_g(self):
        return 1.0 / self.inv_R_g

    @property
    def T_R(self):
        w = [g.rating / g.droop for g in self.online()]
        return sum(wi * g.T_R for wi, g in zip(w, self.online())) / sum(w)

    @property
    def F_H(self):
        w = [g.rating / g.droop for g in self.online()]
        return sum(wi * g.F_H for wi, g in zip(w, self.online())) / sum(w)

    @property
    def generation(self):
        return sum(g.output for g in self.online())


@dataclass
class TieLine:
    from_area: int
    to_area: int
    T: float   # p.u./rad on the system base

    def __post_init__(self):
        if self.from_area == self.to_area:
            raise ValueError("tie line cannot connect an area to itself")
        if self.T <= 0:
            raise ValueError("synchronizing coefficient must be positive")


@dataclass
class DisturbanceEvent:
    """``step_load`` (MW, positive = more load), ``trace`` or ``generator_trip``."""

    kind: str
    area: int
    time: float
    magnitude: float = 0.0
    trace: object = None          # path to ``t,power_pu`` CSV, or (t, p) arrays
    trace_role: str = "renewable"  # renewable output or extra load
    generator: str | None = None

    def __post_init__(self):
        if self.kind not in ("step_load", "trace", "generator_trip"):
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.time < 0 or not math.isfinite(self.magnitude):
            raise ValueError("event time must be >= 0 and magnitude finite")


@dataclass
class NoiseModel:
    freq_sigma: float = 1e-6
    tie_sigma: float = 2e-2
    probe_noise_power: float = 0.2e-3
    seed: int = 0

    def __post_init__(self):
        if self.freq_sigma < 0 or self.tie_sigma < 0 or self.probe_noise_power < 0:
            raise ValueError("noise levels must be nonnegative")


def default_areas():
    """Three-area system, about 800 MW total, two dispatchable IBRs per area."""
    def ibrs(tag):
        return [IbrUnit(f"{tag}-ibr{k}", -0.1, 0.5, 0.0) for k in (1, 2)]
    return [
        AreaParams("area1", [Generator("G1", 250.0, 200.0)], ibrs("a1"), R_I=1 / 26.5),
        AreaParams("area2", [Generator("G2", 100.0, 80.0), Generator("G3", 200.0, 170.0)],
                   ibrs("a2"), R_I=1 / 27.0),
        AreaParams("area3", [Generator("G4", 150.0, 110.0), Generator("G5", 150.0, 110.0)],
                   ibrs("a3"), R_I=1 / 26.5),
    ]


def default_ties():
    return [TieLine(0, 1, 0.5), TieLine(1, 2, 0.5), TieLine(0, 2, 0.5)]


def apply_deadband(x, db):
    """Offset dead zone: 0 inside ``[-db, db]``, shifted identity outside."""
    if db < 0:
        raise ValueError("deadband must be nonnegative")
    x = np.asarray(x, dtype=float)
    out = np.where(x > db, x - db, np.where(x < -db, x + db, 0.0))
    return out.item() if out.ndim == 0 else out


def load_trace(source):
    """Return ``(t, p)`` arrays from a ``t,power_pu`` CSV path or a pair."""
    if isinstance(source, (str, Path)):
        data = np.loadtxt(source, delimiter=",", skiprows=1, ndmin=2)
        return data[:, 0], data[:, 1]
    t, p = source
    return np.asarray(t, dtype=float), np.asarray(p, dtype=float)


class GridModel:
    """Parameter arrays and state of the coupled areas (system-base p.u.)."""

    def __init__(self, areas, ties, f0=F0, system_base=SYSTEM_BASE):
        self.areas = copy.deepcopy(list(areas))
        self.ties = list(ties)
        self.f0 = f0
        self.sb = system_base
        self.na = len(self.areas)
        for tl in self.ties:
            if not (0 <= tl.from_area < self.na and 0 <= tl.to_area < self.na):
                raise ValueError(f"tie line references unknown area: {tl}")
        self.w0 = 2.0 * math.pi * f0
        lap = np.zeros((self.na, self.na))
        for tl in self.ties:
            i, j = tl.from_area, tl.to_area
            lap[i, i] += tl.T
            lap[j, j] += tl.T
            lap[i, j] -= tl.T
            lap[j, i] -= tl.T
        self.lap = lap
        self.ibr_area = np.array([i for i, a in enumerate(self.areas) for _ in a.ibrs], dtype=np.int64)
        self.ibr_list = [u for a in self.areas for u in a.ibrs]
        self.nk = len(self.ibr_list)
        self.tau = np.array([u.lag_time_constant for u in self.ibr_list], dtype=float)
        if np.any(self.tau <= 0):
            raise ValueError("IBR lag time constants must be positive")
        self.refresh_params()
        self.pref = np.zeros(self.na)
        self.x = np.zeros(4 * self.na + self.nk)

    def area_scale(self, i):
        """Factor turning area-base p.u. into system-base p.u."""
        return self.areas[i].base / self.sb

    def refresh_params(self):
        a = self.areas
        sc = np.array([self.area_scale(i) for i in range(self.na)])
        self.two_h = np.array([2.0 * ar.H for ar in a]) * sc
        self.damp = np.array([1.0 / ar.R_I for ar in a]) * sc
        self.inv_rg = np.array([ar.inv_R_g if ar.online() else 0.0 for ar in a]) * sc
        self.t_r = np.array([ar.T_R if ar.online() else 1.0 for ar in a])
        self.f_h = np.array([ar.F_H if ar.online() else 0.0 for ar in a])
        self.db = np.array([ar.deadband / self.f0 for ar in a])

    # state views
    @property
    def omega(self):
        return self.x[: self.na]

    @property
    def xi(self):
        return self.x[self.na: 2 * self.na]

    @property
    def delta(self):
        return self.x[2 * self.na: 3 * self.na]

    @property
    def tie_integral(self):
        return self.x[3 * self.na: 4 * self.na]

    @property
    def p_ibr(self):
        return self.x[4 * self.na:]

    def p_tie(self):
        return self.lap @ self.delta

    def p_mech(self):
        z = apply_deadband_vec(self.omega, self.db)
        return self.xi - self.f_h * self.inv_rg * z

    def integrate(self, h, n_sub, setpoints, pu_half):
        ok = _backend.rk4_interval(
            self.x, h, n_sub, self.two_h, self.damp, self.inv_rg, self.t_r, self.f_h,
            self.db, self.pref, self.lap, self.w0, self.ibr_area, self.tau,
            np.ascontiguousarray(setpoints, dtype=float), np.ascontiguousarray(pu_half))
        if not ok:
            bad = [i for i in range(self.na) if not np.isfinite(self.x[i::self.na][:4]).all()]
            raise NumericalDivergence("state became non-finite", area=bad[0] if bad else None)

    def trip_generator(self, area, name):
        """Take a unit offline; returns its pre-trip output in MW."""
        ar = self.areas[area]
        for g in ar.generators:
            if g.name == name and g.rating > 0:
                old_inv = self.inv_rg[area]
                p0 = g.output
                g.rating = 0.0
                self.refresh_params()
                if old_inv > 0:
                    self.x[self.na + area] *= self.inv_rg[area] / old_inv
                return p0
        raise ValueError(f"generator {name!r} not found online in area {area}")


def apply_deadband_vec(x, db):
    return np.where(x > db, x - db, np.where(x < -db, x + db, 0.0))


def step_dynamics(model, dt, setpoints=None, pu=None):
    """Advance ``model`` by a single RK4 step of length ``dt`` with constant inputs."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    sp = np.zeros(model.nk) if setpoints is None else np.asarray(setpoints, dtype=float)
    pu_arr = np.zeros(model.na) if pu is None else np.asarray(pu, dtype=float)
    model.integrate(dt, 1, sp, np.tile(pu_arr, (3, 1)))
    return model.x.copy()


class ProbeGenerator:
    """``sin(12 pi t) + w(t)`` in MW, ``w`` band-limited white noise.

    ``w`` is discrete white noise at ``dt`` with variance ``noise_power / dt``
    in per-unit on ``base`` MVA, passed through a first-order low-pass with
    cutoff at half the Nyquist frequency and returned in MW.
    """

    def __init__(self, noise_power, dt, rng, amplitude=1.0, base=SYSTEM_BASE):
        self.noise_power = noise_power
        self.dt = dt
        self.rng = rng
        self.amplitude = amplitude
        self.base = base
        self.alpha = 1.0 - math.exp(-2.0 * math.pi * (0.25 / dt) * dt)
        self.w = 0.0

    def __call__(self, t):
        e = self.rng.standard_normal() * math.sqrt(self.noise_power / self.dt) if self.noise_power > 0 else 0.0
        self.w += self.alpha * (e - self.w)
        return self.amplitude * math.sin(12.0 * math.pi * t) + self.base * self.w


def probe_signal(t, noise, dt=0.1, rng=None, amplitude=1.0, base=SYSTEM_BASE):
    """Single probe sample (MW) with a fresh noise draw.

    For sequences use :class:`ProbeGenerator`, which keeps the filter state.
    """
    rng = np.random.default_rng(noise.seed) if rng is None else rng
    return ProbeGenerator(noise.probe_noise_power, dt, rng, amplitude, base)(t)
