import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddfreq import _backend
from ddfreq import _kernels_py as py
from ddfreq.grid import GridModel, default_areas, default_ties

cy = pytest.importorskip("ddfreq._kernels")


def _rk4_inputs(seed):
    rng = np.random.default_rng(seed)
    m = GridModel(default_areas(), default_ties())
    x = 1e-3 * rng.standard_normal(m.x.size)
    n_sub = 10
    pu = 0.05 * rng.standard_normal((2 * n_sub + 1, m.na))
    sp = 0.05 * rng.standard_normal(m.nk)
    pref = 0.01 * rng.standard_normal(m.na)
    return x, (0.01, n_sub, m.two_h, m.damp, m.inv_rg, m.t_r, m.f_h, m.db, pref, m.lap, m.w0,
               m.ibr_area, m.tau, sp, pu)


@pytest.mark.parametrize("seed", range(5))
def test_rk4_backends_agree(seed):
    x0, args = _rk4_inputs(seed)
    a, b = x0.copy(), x0.copy()
    assert py.rk4_interval(a, *args) and cy.rk4_interval(b, *args)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-16)


def test_rk4_reports_nonfinite_state():
    x0, args = _rk4_inputs(0)
    x0[0] = np.inf
    with np.errstate(invalid="ignore"):
        assert not py.rk4_interval(x0.copy(), *args)
        assert not cy.rk4_interval(x0.copy(), *args)


def test_rk4_single_state_exponential_decay():
    # one isolated area with no governor: 2H w' = -D w, exact solution exp(-D t / 2H)
    m = GridModel(default_areas()[:1], [])
    m.inv_rg[:] = 0.0
    m.f_h[:] = 0.0
    m.x[0] = 1e-2
    for mod in (py, cy):
        x = m.x.copy()
        mod.rk4_interval(x, 0.01, 100, m.two_h, m.damp, m.inv_rg, m.t_r, m.f_h, m.db, m.pref,
                         m.lap, m.w0, m.ibr_area, m.tau, np.zeros(m.nk), np.zeros((201, 1)))
        assert x[0] == pytest.approx(1e-2 * np.exp(-m.damp[0] / m.two_h[0]), rel=1e-9)


def _secular_residual(mu, h, bp, c, lam):
    return mu * np.sqrt(c * c + np.sum(bp**2 / (h + mu) ** 2)) - lam


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 12), st.floats(0.0, 2.0), st.floats(1e-3, 1e3), st.integers(0, 10_000))
def test_secular_root_backends_agree(n, c, lam, seed):
    rng = np.random.default_rng(seed)
    h = np.sort(rng.uniform(0.0, 10.0, n))
    bp = rng.standard_normal(n)
    mu_p, _ = py.secular_root(h, bp, c, lam)
    mu_c, _ = cy.secular_root(h, bp, c, lam)
    assert mu_p == pytest.approx(mu_c, rel=1e-10, abs=1e-14)
    if mu_p > 0:
        assert abs(_secular_residual(mu_p, h, bp, c, lam)) < 1e-8 * lam


def test_secular_root_zero_when_subgradient_contains_origin():
    # c = 0 and |b| <= lam: z = 0 is optimal
    h = np.array([1.0, 2.0])
    bp = np.array([0.3, 0.4])
    for mod in (py, cy):
        mu, _ = mod.secular_root(h, bp, 0.0, 1.0)
        assert mu == 0.0


def test_fallback_selected_by_environment():
    code = "from ddfreq import _backend; print(_backend.NAME)"
    env = dict(os.environ, DDFREQ_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True)
    assert out.stdout.strip() == "python"
    assert _backend.NAME == "cython"
