import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import exact_trajectory
from ddfreq.errors import DepthExceedsData, EmptyTruncation, InconsistentDataset
from ddfreq.hankel import (energy_rank, hankel, hankel_array, is_persistently_exciting,
                           numerical_rank, partition, span_residual, truncate)
from ddfreq.lti import Signal, random_stable_system, simulate_lti


def naive_hankel(w, L):
    # direct loop oracle: column j stacks w[j], ..., w[j + L - 1]
    w = np.atleast_2d(np.asarray(w, float).T).T
    T, k = w.shape
    H = np.zeros((L * k, T - L + 1))
    for j in range(T - L + 1):
        for i in range(L):
            H[i * k:(i + 1) * k, j] = w[j + i]
    return H


def test_scalar_hankel_by_hand():
    H = hankel_array([1, 2, 3, 4], 2)
    np.testing.assert_array_equal(H, [[1, 2, 3], [2, 3, 4]])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 3), st.integers(1, 6), st.integers(0, 20), st.integers(0, 1000))
def test_hankel_matches_loop_oracle(k, L, extra, seed):
    T = L + extra
    w = np.random.default_rng(seed).standard_normal((T, k))
    np.testing.assert_array_equal(hankel_array(w, L), naive_hankel(w, L))


def test_hankel_block_rows():
    h = hankel(Signal(np.arange(10.0).reshape(5, 2)), 3)
    assert h.shape == (6, 3)
    np.testing.assert_array_equal(h.block_row(1), [[2, 4, 6], [3, 5, 7]])


def test_depth_errors():
    with pytest.raises(DepthExceedsData):
        hankel_array(np.zeros(3), 4)
    with pytest.raises(ValueError):
        hankel_array(np.zeros(3), 0)


def test_persistency_of_excitation():
    rng = np.random.default_rng(0)
    ok, smin = is_persistently_exciting(rng.standard_normal(50), 10)
    assert ok and smin > 0
    ok, _ = is_persistently_exciting(np.ones(50), 2)
    assert not ok
    # a single sinusoid only excites order 2
    t = np.arange(60)
    assert is_persistently_exciting(np.sin(0.7 * t), 2)[0]
    assert not is_persistently_exciting(np.sin(0.7 * t), 3)[0]
    # too short for the requested order
    assert is_persistently_exciting(rng.standard_normal(10), 6) == (False, 0.0)


def test_numerical_and_energy_rank():
    assert numerical_rank(np.array([1.0, 1e-3, 1e-12])) == 2
    assert numerical_rank(np.zeros(3)) == 0
    s = np.array([3.0, 1.0, 0.1])
    assert energy_rank(s, 0.85) == 1
    assert energy_rank(s, 0.9) == 2
    assert energy_rank(s, 0.9995) == 3


def test_partition_shapes_and_inconsistency():
    sys = random_stable_system(2, seed=0)
    u, d, y = exact_trajectory(sys, 40, 1)
    b = partition(u, d, y, 4)
    assert b.U_p.shape == (4, 36) and b.U_f.shape == (1, 36)
    assert b.D_p.shape == (4, 36) and b.Y_f.shape == (1, 36)
    assert not b.lumped and b.q == 1
    lumped = partition(u, None, y, 4)
    assert lumped.lumped and lumped.D_p.shape == (0, 36)
    with pytest.raises(InconsistentDataset):
        partition(u[:-1], d, y, 4)
    with pytest.raises(DepthExceedsData):
        partition(u[:3], d[:3], y[:3], 4)


def test_exact_prediction_on_fresh_trajectory():
    sys = random_stable_system(3, seed=2)
    u, d, y = exact_trajectory(sys, 80, 3)
    Ti = 6
    b = partition(u, d, y, Ti)
    uu, dd, yy = exact_trajectory(sys, Ti + 1, 4)
    z = np.concatenate([uu[:Ti, 0], dd[:Ti, 0], yy[:Ti, 0], uu[Ti:, 0], dd[Ti:, 0]])
    assert abs((b.prediction_matrix @ z)[0] - yy[Ti, 0]) < 1e-9


def test_truncation_at_exact_rank_keeps_prediction():
    # exact data: H_red has rank (m + q)(T_ini + 1) + n, so cutting there loses nothing
    n, Ti = 3, 6
    sys = random_stable_system(n, seed=5)
    u, d, y = exact_trajectory(sys, 120, 6)
    b = partition(u, d, y, Ti)
    r = 2 * (Ti + 1) + n
    assert b.rank == r
    t = truncate(b, r)
    assert t.truncation_rank == r
    uu, dd, yy = exact_trajectory(sys, Ti + 1, 7)
    z = np.concatenate([uu[:Ti, 0], dd[:Ti, 0], yy[:Ti, 0], uu[Ti:, 0], dd[Ti:, 0]])
    assert abs((t.prediction_matrix @ z)[0] - yy[Ti, 0]) < 1e-8


def test_truncation_errors_and_fraction():
    sys = random_stable_system(2, seed=0)
    b = partition(*exact_trajectory(sys, 60, 0), 4)
    with pytest.raises(EmptyTruncation):
        truncate(b, 0)
    with pytest.raises(ValueError):
        truncate(b, 1.5)
    with pytest.raises(ValueError):
        truncate(b, 10_000)
    assert truncate(b, 1.0).truncation_rank == b.rank


def test_normalized_partition_predicts_in_raw_units():
    sys = random_stable_system(2, seed=8)
    u, d, y = exact_trajectory(sys, 60, 9)
    b = partition(1e3 * u, d, 1e-4 * y, 4, normalize=True)
    assert not np.allclose(b.u_scale, 1.0) and not np.allclose(b.y_scale, 1.0)
    raw = partition(1e3 * u, d, 1e-4 * y, 4)
    assert b.rank == raw.rank


def test_span_residual():
    sys = random_stable_system(2, seed=1)
    u, d, y = exact_trajectory(sys, 60, 1)
    H = hankel_array(np.hstack([u, d, y]), 5)
    uu, dd, yy = exact_trajectory(sys, 5, 2)
    w = np.hstack([uu, dd, yy]).ravel()
    assert span_residual(H, w) < 1e-9
    w[3] += 1.0  # no longer a system trajectory
    assert span_residual(H, w) > 1e-3


def test_too_short_data_cannot_span():
    sys = random_stable_system(3, seed=1)
    u, d, y = exact_trajectory(sys, 12, 1)
    H = hankel_array(np.hstack([u, d, y]), 5)
    uu, dd, yy = exact_trajectory(sys, 5, 2)
    assert span_residual(H, np.hstack([uu, dd, yy]).ravel()) > 1e-6
