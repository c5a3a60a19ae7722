"""Regenerate the bundled synthetic renewable traces (``t,power_pu``).

Wind: mean-reverting gusts. Solar: clear-sky plateau with passing cloud
shadows. Both sampled at 0.1 s for 120 s, per-unit on a 100 MVA base. The wind
trace feeds area 1 and the solar trace area 2.
"""
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "ddfreq" / "data"
DT = 0.1
T_END = 120.0


def wind(rng, mean=0.3, sigma=0.06, tau=6.0):
    n = int(round(T_END / DT)) + 1
    x = np.empty(n)
    x[0] = mean
    a = np.exp(-DT / tau)
    for k in range(1, n):
        x[k] = mean + a * (x[k - 1] - mean) + sigma * np.sqrt(1 - a * a) * rng.standard_normal()
    return np.clip(x, 0.0, None)


def solar(rng, clear=0.4, n_clouds=7, depth=(0.2, 0.5), width=(3.0, 12.0)):
    t = np.arange(int(round(T_END / DT)) + 1) * DT
    p = np.full_like(t, clear)
    for _ in range(n_clouds):
        c = rng.uniform(5.0, T_END - 5.0)
        w = rng.uniform(*width)
        d = rng.uniform(*depth)
        p -= clear * d * np.exp(-0.5 * ((t - c) / (w / 4.0)) ** 2)
    return np.clip(p, 0.0, None)


def write(name, p):
    t = np.arange(len(p)) * DT
    lines = ["t,power_pu"] + [f"{ti:.1f},{pi:.6f}" for ti, pi in zip(t, p)]
    (OUT / name).write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    rng = np.random.default_rng(2023)
    write("wind_area1.csv", wind(rng))
    write("solar_area2.csv", solar(rng))
