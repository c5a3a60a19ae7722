import json

import pytest

from ddfreq.config import builtin_names, load_config, parse_config
from ddfreq.errors import ConfigError


def _raw(**kw):
    raw = {"schema_version": 1, "scenario": {"duration": 5.0}}
    raw.update(kw)
    return raw


@pytest.mark.parametrize("name", builtin_names())
def test_builtin_configs_load(name):
    rc = load_config(name)
    assert rc.name == name and rc.scenario.duration > 0


def test_builtin_list():
    assert {"default", "scenario1_14MW", "scenario1_60MW", "scenario2_renewables",
            "scenario4_generator_trip"} <= set(builtin_names())


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown"):
        parse_config(_raw(colour="red"))
    with pytest.raises(ConfigError, match="unknown"):
        parse_config(_raw(scenario={"duraton": 5.0}))
    with pytest.raises(ConfigError, match="unknown"):
        parse_config(_raw(estimator={"model_mismatch": {"X_scale": 1.0}}))


def test_schema_version_required():
    with pytest.raises(ConfigError, match="schema_version"):
        parse_config({"scenario": {}})


def test_indices_are_one_based():
    rc = parse_config(_raw(scenario={"events": [{"kind": "step_load", "area": 2, "time": 1.0,
                                                 "magnitude": 5.0}]}))
    assert rc.scenario.events[0].area == 1
    with pytest.raises(ConfigError):
        parse_config(_raw(scenario={"events": [{"kind": "step_load", "area": 9, "time": 1.0}]}))


def test_builtin_trace_reference_resolves():
    rc = load_config("scenario2_renewables")
    traces = [e for e in rc.scenario.events if e.kind == "trace"]
    assert traces and all(str(e.trace).endswith(".csv") for e in traces)


def test_invalid_values_become_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(_raw(scenario={"controller": "pid"}))
    with pytest.raises(ConfigError):
        parse_config(_raw(scenario={"noise": {"freq_sigma": -1.0}}))
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(str(p))
    with pytest.raises(ConfigError, match="not found"):
        load_config(str(tmp_path / "absent.json"))


def test_relative_trace_resolves_next_to_config(tmp_path):
    (tmp_path / "tr.csv").write_text("t,power_pu\n0,0.1\n100,0.1\n")
    cfg = _raw(scenario={"events": [{"kind": "trace", "area": 1, "time": 0.0, "trace": "tr.csv"}]})
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg))
    rc = load_config(str(p))
    assert rc.scenario.events[0].trace == str(tmp_path / "tr.csv")
