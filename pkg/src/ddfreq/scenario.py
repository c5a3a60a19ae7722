"""Closed-loop scenario runs and probing-based dataset collection.

Sample ``k`` covers the hold interval ``[k dt, (k+1) dt)``. The IBR
setpoints commanded for that interval are held constant, the tie flow is
measured as its interval average and the frequency at its end. The tie-flow
meter noise is white at the integration step and therefore averaged along
with the flow; the frequency noise is a single draw per sample.
"""
from __future__ import annotations

import copy
import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import TrajectoryDataset, _atomic_write
from .errors import ConfigError, DatasetRequired
from .estimators import DEFAULT_EPS, DEFAULT_LAMBDA1, DEFAULT_LAMBDA2, DEFAULT_T_INI
from .grid import (F0, SYSTEM_BASE, DisturbanceEvent, GridModel, NoiseModel, ProbeGenerator,
                   default_areas, default_ties, load_trace)
from .hankel import is_persistently_exciting
from .lca import LcaMeasurement, LddeArea, ModelBasedArea, OddeArea, allocate
from .lti import Signal

CONTROLLERS = ("none", "droop", "agc", "model_based", "ldde", "odde")
DATA_DRIVEN = ("ldde", "odde")


@dataclass
class EstimatorConfig:
    T_ini: int = DEFAULT_T_INI
    eps: float = DEFAULT_EPS
    gain: float | None = None        # overrides the data-derived 1/G(1)
    lambda1: float = DEFAULT_LAMBDA1
    lambda2: float = DEFAULT_LAMBDA2
    truncation: object = "auto"       # None, int rank or energy fraction
    solver_tol: float = 1e-9
    # multiplicative errors on the model-based baseline's H, T_R and droops
    model_mismatch: dict = field(default_factory=dict)
    agc_gain: float = 0.05            # 1/s, integral gain on ACE
    agc_bias: float | None = None     # p.u./p.u.; default 1/R_I + 1/R_g


@dataclass
class ScenarioConfig:
    areas: list = field(default_factory=default_areas)
    ties: list = field(default_factory=default_ties)
    events: list = field(default_factory=list)
    noise: NoiseModel = field(default_factory=NoiseModel)
    controller: str = "none"
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    dt_sim: float = 0.01
    dt_sample: float = 0.1
    duration: float = 30.0
    datasets: list | None = None      # one TrajectoryDataset per area
    f0: float = F0
    system_base: float = SYSTEM_BASE

    def validate(self):
        if self.controller not in CONTROLLERS:
            raise ConfigError(f"unknown controller {self.controller!r}; choose from {CONTROLLERS}")
        if not (0 < self.dt_sim <= self.dt_sample):
            raise ConfigError("need 0 < dt_sim <= dt_sample")
        ratio = self.dt_sample / self.dt_sim
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError("dt_sample must be an integer multiple of dt_sim")
        if self.duration <= 0:
            raise ConfigError("duration must be positive")
        for ev in self.events:
            if not 0 <= ev.area < len(self.areas):
                raise ConfigError(f"event references unknown area {ev.area}")
        return self

    @property
    def n_sub(self):
        return int(round(self.dt_sample / self.dt_sim))

    @property
    def n_samples(self):
        return int(round(self.duration / self.dt_sample))


@dataclass
class SimResult:
    """Sampled series, row ``j`` at ``t = j dt_sample`` (row 0 is the initial state).

    Frequencies are in Hz and powers in MW. ``delta_f`` is the true area
    frequency, ``delta_f_meas`` what the controller saw; ``delta_p_ibr`` is
    the commanded setpoint sum held over the interval ending at ``t`` and
    ``d_hat`` the estimate formed at ``t``.
    """

    t: np.ndarray
    series: dict
    area_names: list
    generator_names: list
    events: list = field(default_factory=list)
    controller: str = "none"

    def column(self, area, signal):
        return self.series[f"area{area + 1}_{signal}"]

    def to_csv_text(self):
        keys = list(self.series)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + keys)
        for j in range(len(self.t)):
            w.writerow([repr(float(self.t[j]))] + [repr(float(self.series[k][j])) for k in keys])
        return buf.getvalue()

    def to_csv(self, path):
        _atomic_write(path, self.to_csv_text())


def _stream(seed, *tag):
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, *tag])


def _metered_noise(rng, sigma, n_sub, shape):
    """White meter noise drawn at every integration step, averaged over the interval."""
    if sigma == 0:
        return np.zeros(shape)
    return sigma * rng.standard_normal((n_sub,) + tuple(np.atleast_1d(shape))).mean(axis=0)


class _Disturbances:
    """Evaluates the per-area load-side disturbance ``Pu`` (system p.u.)."""

    def __init__(self, events, na, areas, sb, dt_sim):
        self.steps = []      # (time, area, p.u.)
        self.traces = []     # (t0, area, sign*scale, t, p, p(t0))
        self.trips = []      # (time, area, name)
        self.na = na
        for ev in events:
            # events act from the first integration node at or after their time
            te = math.ceil(ev.time / dt_sim - 1e-9) * dt_sim
            if ev.kind == "step_load":
                self.steps.append((te, ev.area, ev.magnitude / sb))
            elif ev.kind == "trace":
                t, p = load_trace(ev.trace)
                base = ev.magnitude if ev.magnitude else areas[ev.area].base
                sign = -1.0 if ev.trace_role == "renewable" else 1.0
                p0 = float(np.interp(te, t, p))
                self.traces.append((te, ev.area, sign * base / sb, t, p, p0))
            else:
                self.trips.append((te, ev.area, ev.generator))

    def breakpoints(self, t0, t1, dt_sim):
        """Substep-aligned event times strictly inside ``(t0, t1)``."""
        out = set()
        for te in [s[0] for s in self.steps] + [s[0] for s in self.trips] + [s[0] for s in self.traces]:
            if t0 < te < t1:
                snapped = t0 + math.ceil((te - t0) / dt_sim - 1e-9) * dt_sim
                if snapped < t1 - 1e-12:
                    out.add(round(snapped, 12))
        return sorted(out)

    def value(self, tau, lo, hi):
        """``Pu`` at ``tau``, with step status judged inside ``[lo, hi]``."""
        pu = np.zeros(self.na)
        probe = min(max(tau, lo + 1e-9), hi - 1e-9)
        for te, i, mag in self.steps:
            if probe >= te:
                pu[i] += mag
        for te, i, scale, t, p, p0 in self.traces:
            if probe >= te:
                pu[i] += scale * (float(np.interp(tau, t, p)) - p0)
        return pu


class _Plant:
    """Grid plus disturbance bookkeeping; advances one hold interval at a time."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.model = GridModel(cfg.areas, cfg.ties, cfg.f0, cfg.system_base)
        self.dist = _Disturbances(cfg.events, self.model.na, self.model.areas, cfg.system_base,
                                 cfg.dt_sim)
        self.trip_pu = np.zeros(self.model.na)
        self.pending_trips = sorted(self.dist.trips, key=lambda e: e[0])
        self.log = []

    def _apply_trips(self, t):
        while self.pending_trips and self.pending_trips[0][0] <= t + 1e-9:
            te, area, name = self.pending_trips.pop(0)
            p0 = self.model.trip_generator(area, name)
            self.trip_pu[area] += p0 / self.cfg.system_base
            self.log.append(f"t={t:.3f}s generator_trip area{area + 1} {name} {p0:.1f}MW")

    def advance(self, t0, setpoints_sys):
        """Integrate over ``[t0, t0 + dt_sample)``; returns the tie-flow average (system p.u.)."""
        cfg, m = self.cfg, self.model
        t1 = t0 + cfg.dt_sample
        before = m.tie_integral.copy()
        edges = [t0] + self.dist.breakpoints(t0, t1, cfg.dt_sim) + [t1]
        for a, b in zip(edges[:-1], edges[1:]):
            self._apply_trips(a)
            n = max(1, int(round((b - a) / cfg.dt_sim)))
            h = (b - a) / n
            nodes = a + 0.5 * h * np.arange(2 * n + 1)
            pu = np.array([self.dist.value(tau, a, b) for tau in nodes]) + self.trip_pu
            m.integrate(h, n, setpoints_sys, pu)
        return (m.tie_integral - before) / cfg.dt_sample

    def disturbance_now(self, t):
        return self.dist.value(t, t - 1.0, t) + self.trip_pu


def _build_controllers(cfg):
    kind = cfg.controller
    est = cfg.estimator
    if kind in DATA_DRIVEN:
        if not cfg.datasets or len(cfg.datasets) != len(cfg.areas) or any(d is None for d in cfg.datasets):
            raise DatasetRequired(f"controller {kind!r} needs one dataset per area")
        if kind == "ldde":
            return [LddeArea(ds, est.T_ini, est.eps, gain=est.gain, truncation=est.truncation)
                    for ds in cfg.datasets]
        return [OddeArea(ds, est.T_ini, est.lambda1, est.lambda2, solver_tol=est.solver_tol,
                         freq_sigma=cfg.noise.freq_sigma)
                for ds in cfg.datasets]
    if kind == "model_based":
        return [ModelBasedArea(a, cfg.dt_sample, est.eps, cfg.f0, est.model_mismatch)
                for a in cfg.areas]
    return None


def agc_step(ace, integral, gain, dt):
    """Integral AGC: returns the updated governor reference per area (area p.u.)."""
    ace = np.asarray(ace, dtype=float)
    return np.asarray(integral, dtype=float) - gain * dt * ace


def run_scenario(cfg, seed=None):
    """Deterministic closed-loop simulation of ``cfg``; ``seed`` overrides the noise seed."""
    cfg.validate()
    seed = cfg.noise.seed if seed is None else seed
    controllers = _build_controllers(cfg)
    plant = _Plant(cfg)
    m = plant.model
    na, dt, f0 = m.na, cfg.dt_sample, cfg.f0
    scale = np.array([m.area_scale(i) for i in range(na)])
    bases = np.array([a.base for a in m.areas])
    rng_f = _stream(seed, 1)
    rng_t = _stream(seed, 2)
    N = cfg.n_samples

    ibr_slices, start = [], 0
    for a in m.areas:
        ibr_slices.append(slice(start, start + len(a.ibrs)))
        start += len(a.ibrs)
    setpoints = np.zeros(m.nk)        # area-base p.u., deviation from dispatch
    d_hat = np.zeros(na)
    pref = np.zeros(na)
    bias = np.array([cfg.estimator.agc_bias if cfg.estimator.agc_bias is not None
                     else 1.0 / a.R_I + a.inv_R_g for a in m.areas])

    names = [a.name for a in m.areas]
    gens = [[g.name for g in a.generators] for a in m.areas]
    rows = N + 1
    out = {}
    for i in range(na):
        for sig in ("delta_f", "delta_f_meas", "delta_p_tie", "delta_p_ibr", "d_hat",
                    "disturbance", "p_mech"):
            out[f"area{i + 1}_{sig}"] = np.zeros(rows)
        for g in gens[i]:
            out[f"area{i + 1}_{g}_delta_f"] = np.zeros(rows)

    for k in range(N):
        t0 = k * dt
        ibr_area = np.array([setpoints[s].sum() for s in ibr_slices])
        m.pref[:] = pref * scale
        tie_avg = plant.advance(t0, setpoints * np.repeat(scale, [s.stop - s.start for s in ibr_slices]))
        w = m.omega.copy()
        f_meas = w + cfg.noise.freq_sigma * rng_f.standard_normal(na)
        tie_meas = tie_avg / scale + _metered_noise(rng_t, cfg.noise.tie_sigma, cfg.n_sub, na)

        if controllers is not None:
            for i in range(na):
                meas = LcaMeasurement(float(f_meas[i]), float(tie_meas[i]), float(ibr_area[i]), k)
                d_hat[i] = controllers[i].step(meas)
                alloc = allocate(d_hat[i], m.areas[i].ibrs)
                setpoints[ibr_slices[i]] = alloc.deltas
        elif cfg.controller == "agc":
            ace = tie_meas + bias * f_meas
            pref = agc_step(ace, pref, cfg.estimator.agc_gain, dt)

        j = k + 1
        dist = plant.disturbance_now(j * dt) / scale
        pm = m.p_mech() / scale
        for i in range(na):
            p = f"area{i + 1}_"
            out[p + "delta_f"][j] = w[i] * f0
            out[p + "delta_f_meas"][j] = f_meas[i] * f0
            out[p + "delta_p_tie"][j] = tie_avg[i] / scale[i] * bases[i]
            out[p + "delta_p_ibr"][j] = ibr_area[i] * bases[i]
            out[p + "d_hat"][j] = d_hat[i] * bases[i]
            out[p + "disturbance"][j] = dist[i] * bases[i]
            out[p + "p_mech"][j] = pm[i] * bases[i]
            for g in gens[i]:
                # one aggregate rotor per area: every unit shares the area speed
                out[f"{p}{g}_delta_f"][j] = w[i] * f0

    result = SimResult(np.arange(rows) * dt, out, names, gens, plant.log, cfg.controller)
    result.controllers = controllers
    return result


@dataclass
class ProbeSettings:
    amplitude: float = 1.0           # MW, sinusoid amplitude per IBR
    noise_power: float | None = None  # defaults to the scenario noise model
    duration: float = 10.0


def collect_dataset(cfg, area, probe=None, seed=None):
    """Probe the IBRs of ``area`` in a calm grid and record ``(dv, df)``.

    Each IBR of the target area is commanded ``sin(12 pi t) + w(t)`` MW; no
    supplementary control runs. Returns a lumped noisy dataset of
    ``round(duration / dt) + 1`` samples with the persistency check in its
    metadata.
    """
    cfg = copy.copy(cfg)
    cfg.events = []
    cfg.controller = "none"
    cfg.validate()
    probe = probe or ProbeSettings()
    seed = cfg.noise.seed if seed is None else seed
    noise_power = cfg.noise.probe_noise_power if probe.noise_power is None else probe.noise_power
    plant = _Plant(cfg)
    m = plant.model
    na, dt = m.na, cfg.dt_sample
    scale = np.array([m.area_scale(i) for i in range(na)])
    base = m.areas[area].base
    rng_f = _stream(seed, 11, area)
    rng_t = _stream(seed, 12, area)
    units = [k for k, a in enumerate(m.ibr_area) if a == area]
    gens = [ProbeGenerator(noise_power, dt, _stream(seed, 13, area, u), probe.amplitude, base) for u in units]
    rows = int(round(probe.duration / dt)) + 1
    u = np.zeros(rows)
    y = np.zeros(rows)
    for k in range(rows):
        t0 = k * dt
        sp = np.zeros(m.nk)
        for g, unit in zip(gens, units):
            sp[unit] = g(t0) / base
        ibr_area = sp[units].sum()
        tie_avg = plant.advance(t0, sp * scale[area])
        f_meas = m.omega[area] + cfg.noise.freq_sigma * rng_f.standard_normal()
        tie_meas = tie_avg[area] / scale[area] + _metered_noise(rng_t, cfg.noise.tie_sigma, cfg.n_sub, 1)[0]
        u[k] = ibr_area - tie_meas
        y[k] = f_meas
    order = DEFAULT_T_INI + 1 + 8
    pe, smin = is_persistently_exciting(Signal(u, dt), order)
    meta = {
        "area": area + 1,
        "seed": int(seed),
        "probe_amplitude_mw": probe.amplitude,
        "probe_noise_power": noise_power,
        "base_mva": base,
        "pe_order": order,
        "persistently_exciting": bool(pe),
        "pe_min_singular_value": float(smin),
    }
    if not pe:
        meta["warning"] = f"input is not persistently exciting of order {order}"
    noisy = cfg.noise.freq_sigma > 0 or cfg.noise.tie_sigma > 0 or noise_power > 0
    return TrajectoryDataset(Signal(u, dt), Signal(y, dt), None, noisy=noisy, metadata=meta)


def collect_all(cfg, probe=None, seed=None):
    """One dataset per area, each collected with only that area excited."""
    return [collect_dataset(cfg, i, probe, seed) for i in range(len(cfg.areas))]
