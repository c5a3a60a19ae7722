import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddfreq.metrics import (MetricsReport, comparison_table, moving_average, nadir_and_settling,
                            reports_csv, rmse, settling_to_target)


def test_rmse_examples():
    assert rmse([3.0, -4.0]) == pytest.approx(math.sqrt(12.5))
    assert rmse([1.0, 2.0, 3.0, 4.0], (2, 4)) == pytest.approx(math.sqrt(12.5))
    assert rmse(np.zeros(5)) == 0.0
    with pytest.raises(ValueError):
        rmse([1.0, 2.0], (1, 1))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50), st.floats(0.1, 10))
def test_rmse_is_absolutely_homogeneous(x, c):
    assert rmse(np.multiply(x, c)) == pytest.approx(c * rmse(x), rel=1e-9, abs=1e-12)
    assert rmse(x) <= max(abs(v) for v in x) + 1e-12


def test_nadir_and_settling_by_hand():
    t = np.arange(8) * 0.5
    x = np.array([0.0, 0.0, -0.2, -0.1, 0.05, 0.02, 0.01, 0.0])
    nadir, tn, ts = nadir_and_settling(t, x, 1.0, band=0.03)
    assert nadir == -0.2 and tn == 1.0 and ts == 2.5


def test_settling_is_inf_when_record_ends_outside_band():
    t = np.arange(5.0)
    _, _, ts = nadir_and_settling(t, [0, -1, -1, -1, -1], 1.0, band=0.5)
    assert math.isinf(ts)


def test_nadir_argument_checks():
    with pytest.raises(ValueError):
        nadir_and_settling(np.arange(3.0), np.zeros(2), 0.0)
    with pytest.raises(ValueError):
        nadir_and_settling(np.arange(3.0), np.zeros(3), 5.0)


def test_damped_sinusoid_settling_matches_envelope():
    # |x| <= A exp(-a t): the last band exit is where the envelope crosses the band
    dt, a, A, band = 0.01, 0.5, 1.0, 0.036
    t = np.arange(0, 20, dt)
    x = A * np.exp(-a * t) * np.cos(2 * np.pi * 1.0 * t)
    _, _, ts = nadir_and_settling(t, x, 0.0, band)
    bound = math.log(A / band) / a
    assert ts <= bound + dt
    assert ts >= bound - 1.0  # within one oscillation period of the envelope crossing


def test_moving_average():
    np.testing.assert_allclose(moving_average([1, 2, 3, 4], 2), [1, 1.5, 2.5, 3.5])
    np.testing.assert_allclose(moving_average([1, 2, 3], 1), [1, 2, 3])
    np.testing.assert_allclose(moving_average(np.ones(20), 10), np.ones(20))


def test_settling_to_target_with_smoothing():
    t = np.arange(40) * 0.1
    x = np.where(t >= 1.0, 1.0, 0.0) + 0.2 * (-1.0) ** np.arange(40)
    raw = settling_to_target(t, x, 1.0, 0.05, 1.0)
    smooth = settling_to_target(t, x, 1.0, 0.05, 1.0, smooth=2)
    assert math.isinf(raw) and smooth == pytest.approx(1.1)


def _report(c, a, b, seed=None):
    return MetricsReport(c, {"G1": a, "G2": b}, {"area1": -0.1}, {"area1": 10.5},
                         {"area1": math.inf}, seed)


def test_comparison_table_alignment_and_stats():
    text = comparison_table({"odde": [_report("odde", 0.01, 0.02)],
                             "ldde": [_report("ldde", 0.1, 0.2, 0), _report("ldde", 0.3, 0.2, 1)]})
    lines = text.splitlines()
    assert len({len(l) for l in lines}) == 1
    assert "Data-based w/ reg." in text and "0.0300" in text
    assert "0.2000 ± 0.1414" in text
    assert comparison_table({}) == ""


def test_reports_csv_rows():
    text = reports_csv({"agc": [_report("agc", 1.0, 2.0, 3)]})
    rows = text.strip().splitlines()
    assert rows[0] == "controller,seed,quantity,key,value"
    assert "agc,3,rmse_total_hz,all,3.0" in rows
    assert "agc,3,settling_time_s,area1,inf" in rows
