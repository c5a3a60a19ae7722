"""JSON run configuration for the command-line tool.

Area, tie-line and event indices are 1-based in the file (``"area": 2`` is
the second area, matching the ``area2_*`` result columns) and 0-based in
the Python API. Unknown keys are rejected at every level.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigError
from .grid import (AreaParams, DisturbanceEvent, Generator, IbrUnit, NoiseModel, TieLine,
                   default_areas, default_ties)
from .scenario import CONTROLLERS, EstimatorConfig, ProbeSettings, ScenarioConfig

SCHEMA_VERSION = 1
BUILTIN_PREFIX = "builtin:"

_TOP = {"schema_version", "name", "seed", "scenario", "estimator", "collection", "datasets",
        "output", "metrics"}
_SCENARIO = {"duration", "dt_sim", "dt_sample", "controller", "events", "noise", "areas", "ties",
             "f0", "system_base"}
_EVENT = {"kind", "area", "time", "magnitude", "trace", "trace_role", "generator"}
_NOISE = {"freq_sigma", "tie_sigma", "probe_noise_power"}
_AREA = {"name", "generators", "ibrs", "R_I", "deadband", "base"}
_GEN = {"name", "rating", "output", "H", "droop", "T_R", "F_H"}
_IBR = {"id", "p_min", "p_max", "current_setpoint", "lag_time_constant"}
_TIE = {"from_area", "to_area", "T"}
_ESTIMATOR = {"T_ini", "eps", "gain", "lambda1", "lambda2", "truncation", "solver_tol",
              "model_mismatch", "agc_gain", "agc_bias"}
_MISMATCH = {"H_scale", "T_R_scale", "R_scale"}
_COLLECTION = {"duration", "probe_amplitude", "probe_noise_power"}
_DATASETS = {"dir", "pattern"}
_OUTPUT = {"dir"}
_METRICS = {"event_time", "band_hz", "window"}


def _check(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    extra = set(obj) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {sorted(extra)}")
    return obj


def _build(cls, obj, allowed, where):
    _check(obj, allowed, where)
    try:
        return cls(**obj)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass
class RunConfig:
    scenario: ScenarioConfig
    probe: ProbeSettings
    seed: int = 0
    name: str = "run"
    dataset_dir: Path | None = None   # default: <out_dir>/datasets
    dataset_pattern: str = "area{i}.csv"
    out_dir: Path = Path("out")
    event_time: float = 0.0
    band_hz: float = 0.036
    window: tuple | None = None
    source: Path | None = None
    raw: dict = field(default_factory=dict)

    @property
    def datasets_dir(self):
        return self.dataset_dir if self.dataset_dir is not None else self.out_dir / "datasets"

    def dataset_paths(self):
        return [self.datasets_dir / self.dataset_pattern.format(i=i + 1)
                for i in range(len(self.scenario.areas))]


def builtin_names():
    return sorted(p.name[:-5] for p in resources.files("ddfreq.data").iterdir()
                  if p.name.endswith(".json"))


def resolve_path(ref, base_dir=None):
    """Resolve ``builtin:<name>`` or a path relative to ``base_dir``."""
    ref = str(ref)
    if ref.startswith(BUILTIN_PREFIX):
        p = Path(str(resources.files("ddfreq.data").joinpath(ref[len(BUILTIN_PREFIX):])))
        if not p.exists():
            raise ConfigError(f"no bundled file {ref!r}")
        return p
    p = Path(ref)
    if not p.is_absolute() and base_dir is not None:
        p = Path(base_dir) / p
    return p


def resolve_config_path(ref):
    """Config path, or the name of a bundled config (with or without ``builtin:``)."""
    ref = str(ref)
    name = ref[len(BUILTIN_PREFIX):] if ref.startswith(BUILTIN_PREFIX) else ref
    p = Path(ref)
    if p.exists():
        return p
    if name in builtin_names():
        return resolve_path(BUILTIN_PREFIX + name + ".json")
    raise ConfigError(f"config {ref!r} not found (bundled: {', '.join(builtin_names())})")


def _areas(raw):
    out = []
    for k, a in enumerate(raw):
        where = f"scenario.areas[{k}]"
        _check(a, _AREA, where)
        a = dict(a)
        gens = [_build(Generator, g, _GEN, f"{where}.generators") for g in a.pop("generators", [])]
        ibrs = [_build(IbrUnit, u, _IBR, f"{where}.ibrs") for u in a.pop("ibrs", [])]
        if not gens:
            raise ConfigError(f"{where}: at least one generator is required")
        out.append(_build(AreaParams, dict(a, generators=gens, ibrs=ibrs),
                          _AREA, where))
    return out


def _ties(raw):
    out = []
    for k, t in enumerate(raw):
        _check(t, _TIE, f"scenario.ties[{k}]")
        t = dict(t)
        for key in ("from_area", "to_area"):
            t[key] = int(t[key]) - 1
        out.append(_build(TieLine, t, _TIE, f"scenario.ties[{k}]"))
    return out


def _events(raw, base_dir):
    out = []
    for k, e in enumerate(raw):
        where = f"scenario.events[{k}]"
        _check(e, _EVENT, where)
        e = dict(e)
        if "area" not in e or "kind" not in e or "time" not in e:
            raise ConfigError(f"{where}: 'kind', 'area' and 'time' are required")
        e["area"] = int(e["area"]) - 1
        if e.get("trace") is not None:
            path = resolve_path(e["trace"], base_dir)
            if not path.exists():
                raise ConfigError(f"{where}: trace file {path} not found")
            e["trace"] = str(path)
        out.append(_build(DisturbanceEvent, e, _EVENT, where))
    return out


def parse_config(raw, base_dir=None, source=None):
    """Validate a decoded JSON object and build a :class:`RunConfig`."""
    _check(raw, _TOP, "config")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    seed = int(raw.get("seed", 0))
    sc = _check(raw.get("scenario", {}), _SCENARIO, "scenario")
    noise = _build(NoiseModel, dict(sc.get("noise", {}), seed=seed), _NOISE | {"seed"}, "scenario.noise")
    est_raw = dict(_check(raw.get("estimator", {}), _ESTIMATOR, "estimator"))
    _check(est_raw.get("model_mismatch", {}), _MISMATCH, "estimator.model_mismatch")
    est = _build(EstimatorConfig, est_raw, _ESTIMATOR, "estimator")
    areas = _areas(sc["areas"]) if "areas" in sc else default_areas()
    ties = _ties(sc["ties"]) if "ties" in sc else default_ties()
    kw = {k: sc[k] for k in ("duration", "dt_sim", "dt_sample", "controller", "f0", "system_base")
          if k in sc}
    if kw.get("controller", "none") not in CONTROLLERS:
        raise ConfigError(f"scenario.controller must be one of {CONTROLLERS}")
    scenario = ScenarioConfig(areas=areas, ties=ties, events=_events(sc.get("events", []), base_dir),
                              noise=noise, estimator=est, **kw)
    scenario.validate()
    probe = _build(ProbeSettings, {({"probe_amplitude": "amplitude",
                                     "probe_noise_power": "noise_power"}).get(k, k): v
                                   for k, v in _check(raw.get("collection", {}), _COLLECTION,
                                                      "collection").items()},
                   {"amplitude", "noise_power", "duration"}, "collection")
    ds = _check(raw.get("datasets", {}), _DATASETS, "datasets")
    outp = _check(raw.get("output", {}), _OUTPUT, "output")
    met = _check(raw.get("metrics", {}), _METRICS, "metrics")
    window = tuple(met["window"]) if "window" in met else None
    return RunConfig(
        scenario=scenario, probe=probe, seed=seed, name=str(raw.get("name", "run")),
        dataset_dir=resolve_path(ds["dir"], base_dir) if "dir" in ds else None,
        dataset_pattern=ds.get("pattern", "area{i}.csv"),
        out_dir=Path(outp.get("dir", "out")),
        event_time=float(met.get("event_time", 0.0)),
        band_hz=float(met.get("band_hz", 0.036)),
        window=window, source=source, raw=raw)


def load_config(ref):
    path = resolve_config_path(ref)
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    # bundled configs resolve relative paths against the working directory
    is_builtin = str(path).startswith(str(resources.files("ddfreq.data")))
    return parse_config(raw, base_dir=None if is_builtin else path.parent, source=path)
