import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddfreq.grid import DisturbanceEvent, IbrUnit, NoiseModel, default_areas
from ddfreq.lca import LcaMeasurement, ModelBasedArea, aggregate_input, allocate, area_model
from ddfreq.lti import dc_gain_analytic
from ddfreq.scenario import ScenarioConfig, collect_all, run_scenario


def _units(*rooms):
    return [IbrUnit(f"u{i}", 0.0, r) for i, r in enumerate(rooms)]


def test_allocate_zero_request():
    a = allocate(0.0, _units(1.0, 1.0))
    np.testing.assert_array_equal(a.deltas, [0.0, 0.0])
    assert a.remainder == 0.0


@pytest.mark.parametrize("rooms, demand, expected", [
    ((10.0, 10.0), 10.0, [5.0, 5.0]),
    ((2.0, 18.0), 10.0, [1.0, 9.0]),
])
def test_allocate_proportional_to_headroom(rooms, demand, expected):
    a = allocate(demand, _units(*rooms))
    np.testing.assert_allclose(a.deltas, expected)
    assert a.remainder == pytest.approx(0.0)


def test_allocate_saturates_and_reports_remainder():
    a = allocate(30.0, _units(2.0, 18.0))
    np.testing.assert_allclose(a.deltas, [2.0, 18.0])
    assert a.remainder == pytest.approx(10.0)


def test_allocate_negative_uses_downward_headroom():
    units = [IbrUnit("a", -1.0, 1.0, current_setpoint=0.5), IbrUnit("b", 0.0, 1.0, current_setpoint=0.5)]
    a = allocate(-1.0, units)
    np.testing.assert_allclose(a.deltas, [-1.5 / 2.0, -0.5 / 2.0])


def test_allocate_rejects_nonfinite():
    with pytest.raises(ValueError):
        allocate(float("nan"), _units(1.0))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 5), st.floats(0, 5), st.floats(0, 1)), min_size=1, max_size=5),
       st.floats(-20, 20))
def test_allocation_is_feasible_and_conserves(bounds, demand):
    units = [IbrUnit(f"u{i}", -lo, hi, current_setpoint=f * hi - (1 - f) * lo)
             for i, (lo, hi, f) in enumerate(bounds)]
    a = allocate(demand, units)
    for u, dv in zip(units, a.deltas):
        assert u.p_min - 1e-9 <= u.current_setpoint + dv <= u.p_max + 1e-9
        assert dv == 0.0 or np.sign(dv) == np.sign(demand)
    assert a.total + a.remainder == pytest.approx(demand, abs=1e-9)
    room = sum(max(u.p_max - u.current_setpoint, 0) if demand > 0 else
               max(u.current_setpoint - u.p_min, 0) for u in units)
    assert abs(a.total) == pytest.approx(min(abs(demand), room), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.1, 5), min_size=2, max_size=4), st.floats(0, 5), st.floats(0, 5))
def test_allocation_monotone_in_request(rooms, r1, r2):
    units = _units(*rooms)
    lo, hi = sorted((r1, r2))
    assert np.all(allocate(lo, units).deltas <= allocate(hi, units).deltas + 1e-12)


def test_allocation_matches_grid_search():
    # brute force: among splits on a 0.5 grid, proportional is the unique one
    # that serves the demand with equal headroom utilisation
    rooms = (1.0, 3.0)
    units = _units(*rooms)
    a = allocate(2.0, units)
    grid = np.arange(0.0, 3.01, 0.5)
    best = min(((x, y) for x in grid for y in grid if x <= 1 and abs(x + y - 2.0) < 1e-12),
               key=lambda p: abs(p[0] / rooms[0] - p[1] / rooms[1]))
    np.testing.assert_allclose(a.deltas, best)


def test_measurement_rejects_nonfinite():
    with pytest.raises(ValueError):
        LcaMeasurement(float("nan"), 0.0, 0.0)
    m = LcaMeasurement(0.0, 0.2, 0.5)
    assert aggregate_input(m, 0.1) == pytest.approx(0.2)


def test_area_model_dc_gain_matches_droop():
    # steady state of the aggregate area: w = v / (1/R_I + 1/R_g)
    a = default_areas()[0]
    sys = area_model(a, 0.1)
    g = dc_gain_analytic(sys)[0, 0]
    assert g == pytest.approx(-1.0 / (1.0 / a.R_I + a.inv_R_g), rel=1e-10)


def test_model_based_observer_tracks_exact_aggregate():
    a = default_areas()[0]
    obs = ModelBasedArea(a, 0.1)
    sys = obs.sys
    x = np.zeros(sys.n)
    d = 0.05
    for k in range(2000):
        x_next = sys.A @ x + sys.B_d[:, 0] * d
        y = float((sys.C @ x)[0] + sys.D_d[0, 0] * d)
        d_hat = obs.step(LcaMeasurement(y, 0.0, 0.0, k))
        x = x_next
    assert d_hat == pytest.approx(d, rel=1e-6)


@pytest.fixture(scope="module")
def datasets():
    return collect_all(ScenarioConfig(), seed=0)


@pytest.mark.parametrize("controller", ["ldde", "odde"])
def test_estimate_is_local(datasets, controller):
    # a step in area 2 should leave the estimates of areas 1 and 3 near zero
    cfg = ScenarioConfig(controller=controller, datasets=datasets, duration=25.0,
                         events=[DisturbanceEvent("step_load", 1, 10.0, 14.0)])
    res = run_scenario(cfg, seed=0)
    late = res.t >= 20.0
    assert np.mean(res.column(1, "d_hat")[late]) == pytest.approx(14.0, rel=0.1)
    for i in (0, 2):
        assert abs(np.mean(res.column(i, "d_hat")[late])) < 1.5


def test_quiescent_estimate_stays_near_zero(datasets):
    cfg = ScenarioConfig(controller="ldde", datasets=datasets, duration=20.0)
    res = run_scenario(cfg, seed=1)
    for i in range(3):
        assert np.max(np.abs(res.column(i, "d_hat"))) < 3.0


def test_noise_free_grid_estimates_exactly_zero(datasets):
    cfg = ScenarioConfig(controller="ldde", datasets=datasets, duration=5.0,
                         noise=NoiseModel(freq_sigma=0.0, tie_sigma=0.0, probe_noise_power=0.0))
    res = run_scenario(cfg, seed=0)
    assert np.all(res.column(0, "d_hat") == 0.0)
