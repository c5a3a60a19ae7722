"""Post-processing of simulation results: RMSE, nadir, settling time, tables."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_BAND_HZ = 0.036


def _window(series, window):
    x = np.asarray(series, dtype=float)
    if window is not None:
        x = x[window] if isinstance(window, slice) else x[window[0]:window[1]]
    if x.size == 0:
        raise ValueError("empty window")
    return x


def rmse(series, window=None):
    """Root mean square deviation from zero over ``window`` (slice or index pair)."""
    x = _window(series, window)
    return float(np.sqrt(np.mean(x * x)))


def _first_time_staying_inside(t, inside, start):
    """First ``t[k] >= start`` from which ``inside`` holds to the end, else inf."""
    idx = np.flatnonzero(t >= start - 1e-12)
    if idx.size == 0:
        raise ValueError("event_time lies beyond the series")
    ok = inside[idx]
    if not ok[-1]:
        return math.inf
    bad = np.flatnonzero(~ok)
    k = idx[0] if bad.size == 0 else idx[bad[-1] + 1]
    return float(t[k])


def nadir_and_settling(t, series, event_time, band=DEFAULT_BAND_HZ):
    """Extreme post-event deviation and settling time.

    Returns ``(nadir, nadir_time, settling_time)``. The nadir is the
    post-event sample of largest magnitude (signed). Settling is the first
    post-event sample from which ``|x| <= band`` holds to the end of the
    record; ``math.inf`` if the last sample is outside the band.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(series, dtype=float)
    if t.shape != x.shape:
        raise ValueError("t and series must have the same shape")
    if not t[0] <= event_time <= t[-1]:
        raise ValueError("event_time must lie within the series")
    post = t >= event_time - 1e-12
    xp = x[post]
    k = int(np.argmax(np.abs(xp)))
    nadir = float(xp[k]) if xp[k] != 0 else 0.0
    return nadir, float(t[post][k]), _first_time_staying_inside(t, np.abs(x) <= band, event_time)


def moving_average(x, width):
    """Trailing moving average; the first ``width - 1`` samples average what exists."""
    x = np.asarray(x, dtype=float)
    if width <= 1:
        return x.copy()
    c = np.cumsum(np.concatenate([[0.0], x]))
    k = np.arange(1, len(x) + 1)
    lo = np.maximum(k - width, 0)
    return (c[k] - c[lo]) / (k - lo)


def settling_to_target(t, series, target, tol, event_time, smooth=1):
    """First time after ``event_time`` from which ``|x - target| <= tol`` holds.

    ``smooth`` applies a trailing moving average of that many samples first,
    which is how noisy estimates are judged.
    """
    t = np.asarray(t, dtype=float)
    x = moving_average(series, smooth)
    return _first_time_staying_inside(t, np.abs(x - target) <= tol, event_time)


@dataclass
class MetricsReport:
    controller: str
    rmse: dict                      # generator label -> Hz
    nadir: dict                     # area label -> Hz
    nadir_time: dict
    settling_time: dict             # area label -> s (inf if never)
    seed: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def total(self):
        return float(sum(self.rmse.values()))


def report_from_result(result, event_time=0.0, band=DEFAULT_BAND_HZ, window=None, seed=None):
    """Table-style metrics of a :class:`SimResult`.

    RMSE is per generator (each generator reports its area's speed); nadir
    and settling per area.
    """
    t = result.t
    sl = slice(None)
    if window is not None:
        sl = (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12)
    rm, nd, nt, st = {}, {}, {}, {}
    for i, gens in enumerate(result.generator_names):
        for g in gens:
            rm[g] = rmse(result.series[f"area{i + 1}_{g}_delta_f"][sl])
        f = result.column(i, "delta_f")
        n, ntime, s = nadir_and_settling(t, f, event_time, band)
        key = f"area{i + 1}"
        nd[key], nt[key], st[key] = n, ntime, s
    return MetricsReport(result.controller, rm, nd, nt, st, seed)


TABLE_LABELS = {
    "odde": "Data-based w/ reg.",
    "ldde": "Data-based w/o reg.",
    "model_based": "Model-based",
    "agc": "AGC",
    "none": "Droop only",
    "droop": "Droop only",
}


def _fmt(v, digits=4):
    return "inf" if math.isinf(v) else f"{v:.{digits}f}"


def comparison_table(reports):
    """Aligned plain-text RMSE table, one row per controller.

    ``reports`` maps controller -> list of :class:`MetricsReport` (one per
    seed). Several seeds produce ``mean ± std`` cells.
    """
    ctrls = list(reports)
    if not ctrls:
        return ""
    gens = list(reports[ctrls[0]][0].rmse)
    header = ["Control type"] + [f"{g} RMSE (Hz)" for g in gens] + ["Total (Hz)"]
    rows = []
    for c in ctrls:
        reps = reports[c]
        cells = [TABLE_LABELS.get(c, c)]
        for g in gens + ["__total__"]:
            vals = np.array([r.total if g == "__total__" else r.rmse[g] for r in reps])
            if len(vals) == 1:
                cells.append(_fmt(vals[0]))
            else:
                cells.append(f"{_fmt(vals.mean())} ± {_fmt(vals.std(ddof=1))}")
        rows.append(cells)
    widths = [max(len(r[j]) for r in [header] + rows) for j in range(len(header))]
    line = "-+-".join("-" * w for w in widths)
    out = [line, " | ".join(h.ljust(w) for h, w in zip(header, widths)), line]
    out += [" | ".join(c.ljust(w) for c, w in zip(r, widths)) for r in rows]
    out.append(line)
    return "\n".join(out) + "\n"


def reports_csv(reports):
    """Tidy CSV: one row per (controller, seed, quantity, key)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["controller", "seed", "quantity", "key", "value"])
    for c, reps in reports.items():
        for r in reps:
            seed = "" if r.seed is None else r.seed
            for g, v in r.rmse.items():
                w.writerow([c, seed, "rmse_hz", g, repr(v)])
            w.writerow([c, seed, "rmse_total_hz", "all", repr(r.total)])
            for a in r.nadir:
                w.writerow([c, seed, "nadir_hz", a, repr(r.nadir[a])])
                w.writerow([c, seed, "nadir_time_s", a, repr(r.nadir_time[a])])
                w.writerow([c, seed, "settling_time_s", a, repr(r.settling_time[a])])
    return buf.getvalue()
