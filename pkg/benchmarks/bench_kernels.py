"""Time the compiled kernels against the pure-Python fallback.

Usage: ``python benchmarks/bench_kernels.py [--repeat N]``. Both backends are
fed identical inputs; the script also reports the largest disagreement.
"""
import argparse
import timeit

import numpy as np

from ddfreq import _kernels_py as py
from ddfreq.grid import GridModel, default_areas, default_ties

try:
    from ddfreq import _kernels as cy
except ImportError:
    cy = None


def rk4_case():
    m = GridModel(default_areas(), default_ties())
    m.x[: m.na] = [1e-3, -2e-3, 5e-4]
    n_sub = 10
    pu = np.tile([0.01, -0.02, 0.0], (2 * n_sub + 1, 1))
    sp = np.full(m.nk, 0.01)
    args = (0.01, n_sub, m.two_h, m.damp, m.inv_rg, m.t_r, m.f_h, m.db, m.pref, m.lap, m.w0,
            m.ibr_area, m.tau, sp, pu)
    return m.x.copy(), args


def secular_case(n=200, seed=0):
    rng = np.random.default_rng(seed)
    h = np.sort(rng.uniform(1e-4, 10.0, n))
    bp = rng.standard_normal(n)
    return (h, bp, 0.3, 0.5)


def bench(label, fn, repeat):
    per = min(timeit.repeat(fn, number=repeat, repeat=3)) / repeat
    print(f"{label:<28s} {per * 1e6:10.1f} us/call")
    return per


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=200)
    a = ap.parse_args()

    x0, args = rk4_case()
    sec = secular_case()
    backends = [("python", py)] + ([("cython", cy)] if cy is not None else [])
    times = {}
    outs = {}
    for name, mod in backends:
        times[name, "rk4"] = bench(f"rk4_interval [{name}]", lambda: mod.rk4_interval(x0.copy(), *args), a.repeat)
        times[name, "sec"] = bench(f"secular_root [{name}]", lambda: mod.secular_root(*sec), a.repeat)
        x = x0.copy()
        mod.rk4_interval(x, *args)
        outs[name] = (x, mod.secular_root(*sec)[0])
    if cy is None:
        print("compiled extension not built; only the fallback was timed")
        return
    print(f"speed-up rk4_interval   {times['python', 'rk4'] / times['cython', 'rk4']:.1f}x")
    print(f"speed-up secular_root   {times['python', 'sec'] / times['cython', 'sec']:.1f}x")
    dx = np.max(np.abs(outs["python"][0] - outs["cython"][0]))
    dmu = abs(outs["python"][1] - outs["cython"][1])
    print(f"max |state diff| {dx:.2e}, |mu diff| {dmu:.2e}")


if __name__ == "__main__":
    main()
