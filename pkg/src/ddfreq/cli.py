"""Command-line entry point: ``ddfreq collect | simulate | compare``.

Exit codes: 0 success, 1 configuration error, 2 missing prerequisite
(dataset), 3 numerical divergence.
"""
from __future__ import annotations

import argparse
import copy
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import builtin_names, load_config
from .dataset import TrajectoryDataset, _atomic_write
from .errors import ConfigError, DatasetRequired, InconsistentDataset, NumericalDivergence
from .metrics import comparison_table, report_from_result, reports_csv
from .scenario import CONTROLLERS, DATA_DRIVEN, collect_all, run_scenario

log = logging.getLogger("ddfreq")

EXIT_OK, EXIT_CONFIG, EXIT_MISSING, EXIT_DIVERGED = 0, 1, 2, 3


def _apply_overrides(rc, args):
    if getattr(args, "seed", None) is not None:
        rc.seed = args.seed
        rc.scenario.noise.seed = args.seed
    if getattr(args, "out_dir", None):
        rc.out_dir = Path(args.out_dir)
    if getattr(args, "duration", None) is not None:
        if args.duration <= 0:
            raise ConfigError("--duration must be positive")
        if args.command == "collect":
            rc.probe.duration = args.duration
        else:
            rc.scenario.duration = args.duration
    if getattr(args, "probe_amplitude", None) is not None:
        rc.probe.amplitude = args.probe_amplitude
    return rc


def _parse_controllers(text):
    ctrls = [c.strip() for c in text.split(",") if c.strip()]
    bad = [c for c in ctrls if c not in CONTROLLERS]
    if bad or not ctrls:
        raise ConfigError(f"--controller: unknown {bad}; choose from {', '.join(CONTROLLERS)}")
    return ctrls


def _load_datasets(rc):
    paths = rc.dataset_paths()
    missing = [str(p) for p in paths if not p.exists()]
    if missing:
        raise DatasetRequired(f"dataset file(s) missing: {', '.join(missing)} (run 'ddfreq collect' first)")
    try:
        return [TrajectoryDataset.from_csv(p) for p in paths]
    except (InconsistentDataset, ValueError) as exc:
        raise DatasetRequired(f"unreadable dataset: {exc}") from exc


def cmd_collect(rc, args):
    sc = rc.scenario
    datasets = collect_all(sc, rc.probe, seed=rc.seed)
    paths = rc.dataset_paths()
    for ds, path in zip(datasets, paths):
        ds.to_csv(path)
        warn = ds.metadata.get("warning")
        print(f"wrote {path} ({len(ds)} rows){'; warning: ' + warn if warn else ''}")
    return EXIT_OK


def _one_run(rc, controller, seed, datasets):
    sc = copy.deepcopy(rc.scenario)
    sc.controller = controller
    sc.datasets = datasets if controller in DATA_DRIVEN else None
    result = run_scenario(sc, seed=seed)
    report = report_from_result(result, rc.event_time, rc.band_hz, rc.window, seed=seed)
    return result.to_csv_text(), report, result.events


def cmd_simulate(rc, args):
    controller = _parse_controllers(args.controller)[0] if args.controller else rc.scenario.controller
    datasets = _load_datasets(rc) if controller in DATA_DRIVEN else None
    text, report, events = _one_run(rc, controller, rc.seed, datasets)
    stem = f"{rc.name}_{controller}_seed{rc.seed}"
    out = rc.out_dir
    _atomic_write(out / f"{stem}.csv", text)
    reports = {controller: [report]}
    _atomic_write(out / f"{stem}_metrics.csv", reports_csv(reports))
    table = comparison_table(reports)
    _atomic_write(out / f"{stem}_report.txt", table)
    for e in events:
        print(e)
    print(table, end="")
    print(f"wrote {out / (stem + '.csv')}")
    return EXIT_OK


def _compare_job(payload):
    rc, controller, seed, datasets = payload
    _, report, _ = _one_run(rc, controller, seed, datasets)
    return controller, seed, report


def cmd_compare(rc, args):
    ctrls = _parse_controllers(args.controller or ",".join(["odde", "ldde", "model_based", "agc", "none"]))
    seeds = [rc.seed + k for k in range(args.seeds)]
    need_data = any(c in DATA_DRIVEN for c in ctrls)
    per_seed = {}
    for s in seeds:
        if not need_data:
            per_seed[s] = None
        elif args.collect:
            per_seed[s] = collect_all(rc.scenario, rc.probe, seed=s)
        else:
            per_seed[s] = _load_datasets(rc)
    jobs = [(rc, c, s, per_seed[s]) for s in seeds for c in ctrls]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            done = list(ex.map(_compare_job, jobs))
    else:
        done = [_compare_job(j) for j in jobs]
    reports = {c: [] for c in ctrls}
    for c, _, rep in done:   # map preserves submission order
        reports[c].append(rep)
    stem = f"{rc.name}_compare"
    _atomic_write(rc.out_dir / f"{stem}.csv", reports_csv(reports))
    table = comparison_table(reports)
    _atomic_write(rc.out_dir / f"{stem}.txt", table)
    print(table, end="")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="ddfreq", description="Data-driven fast frequency control simulator.")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True,
                        help=f"JSON config path or bundled name ({', '.join(builtin_names())})")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out-dir", default=None)
    common.add_argument("--duration", type=float, default=None,
                        help="collection length (collect) or simulated time (simulate/compare), s")
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("-v", "--verbose", action="store_true")
    c = sub.add_parser("collect", parents=[common], help="probe each area and write one dataset per area")
    c.add_argument("--probe-amplitude", type=float, default=None, help="MW")
    s = sub.add_parser("simulate", parents=[common], help="run one scenario")
    s.add_argument("--controller", default=None)
    m = sub.add_parser("compare", parents=[common], help="Table-style comparison of controllers")
    m.add_argument("--controller", default=None, help="comma-separated list")
    m.add_argument("--seeds", type=int, default=1)
    m.add_argument("--collect", action="store_true",
                   help="collect fresh datasets per seed instead of reading dataset files")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.jobs < 1 or getattr(args, "seeds", 1) < 1:
            raise ConfigError("--jobs and --seeds must be positive")
        rc = _apply_overrides(load_config(args.config), args)
        if args.command != "collect" and rc.event_time > rc.scenario.duration:
            raise ConfigError(f"metrics.event_time {rc.event_time} s lies beyond the "
                              f"{rc.scenario.duration} s run")
        handler = {"collect": cmd_collect, "simulate": cmd_simulate, "compare": cmd_compare}[args.command]
        return handler(rc, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DatasetRequired as exc:
        print(f"missing prerequisite: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except NumericalDivergence as exc:
        print(f"numerical divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
