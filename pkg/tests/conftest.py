import numpy as np
import pytest

from ddfreq.lti import random_stable_system, simulate_lti

# criterion number -> (passed, one-line detail); filled by test_acceptance.py
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        ok, detail = ACCEPTANCE_LINES[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")


def exact_trajectory(sys, T, seed, lumped=False):
    """Random-input trajectory of ``sys`` from a random initial state."""
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((T, sys.m))
    d = rng.standard_normal((T, sys.q))
    y, _ = simulate_lti(sys, rng.standard_normal(sys.n), u, d)
    return u, d, y.samples


@pytest.fixture
def siso_system():
    return random_stable_system(3, seed=7)
