"""Command-line entry point: prepare, synth, forecast, search, summarize.

Progress and diagnostics go to standard error; machine-readable output goes
to files. Exit codes: 0 success, 1 configuration or I/O error, 2 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .config import grid_from_config, load_dataset, load_run_config, point_from_dict
from .data_pipeline import (
    NightPolicy,
    apply_night_policy,
    from_transmissivity,
    ingest_csv,
    resample_15min,
    to_transmissivity,
    write_csv,
)
from .errors import ConfigError, SolarcastError
from .forecast_core import recursive_forecast_matrix
from .search import (
    SAMPLES_PER_DAY,
    _fit_model,
    persist_results,
    run_search,
    summarize,
    write_summary_csv,
)
from .solar_geometry import GeoLocation, extraterrestrial_irradiance


def _location_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--latitude", type=float, required=True)
    parser.add_argument("--longitude", type=float, required=True)
    parser.add_argument("--elevation-m", type=float, default=0.0)
    parser.add_argument("--utc-offset-min", type=int, default=0)


def _location_from(args) -> GeoLocation:
    try:
        return GeoLocation(
            latitude=args.latitude,
            longitude=args.longitude,
            elevation_m=args.elevation_m,
            utc_offset_min=args.utc_offset_min,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_prepare(args) -> int:
    location = _location_from(args)
    series = ingest_csv(args.input, location)
    if series.step == timedelta(minutes=1):
        series = resample_15min(series)
    write_csv(series, args.output)
    gaps = np.nonzero(np.isnan(series.values))[0]
    gap_path = Path(str(args.output) + ".gaps.csv")
    with open(gap_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["index", "timestamp", "reason"])
        stamps = series.timestamps()
        for i in gaps:
            writer.writerow(
                [str(i), np.datetime_as_string(stamps[i], unit="s") + "Z", "gap"]
            )
    print(
        f"wrote {len(series)} samples to {args.output} "
        f"({len(gaps)} invalid blocks; report: {gap_path})",
        file=sys.stderr,
    )
    return 0


def cmd_synth(args) -> int:
    from .synth import synthetic_irradiance

    location = _location_from(args)
    start = None
    if args.start:
        start = datetime.fromisoformat(args.start.replace("Z", "+00:00"))
    try:
        series = synthetic_irradiance(location, args.days, args.seed, start=start)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    write_csv(series, args.output)
    print(f"wrote {len(series)} 1-min samples to {args.output}", file=sys.stderr)
    return 0


def _point_from_args(args) -> dict:
    payload = {"method": args.method}
    for key in ("p", "d", "q", "P", "D", "Q", "k", "training_days"):
        value = getattr(args, key, None)
        if value is not None:
            payload[key] = value
    if args.epsilon is not None:
        payload["epsilon"] = args.epsilon
    if args.weight_mode is not None:
        payload["weight_mode"] = args.weight_mode
    if args.preprocessing is not None:
        payload["preprocessing"] = args.preprocessing
    if args.night_policy is not None:
        payload["night_policy"] = args.night_policy
    return payload


def cmd_forecast(args) -> int:
    config = load_run_config(args.config)
    base_dir = Path(args.config).parent
    by_id = {ds.id: ds for ds in config.datasets}
    dataset_id = args.dataset or config.datasets[0].id
    if dataset_id not in by_id:
        raise ConfigError(f"dataset {dataset_id!r} not in config")
    point = point_from_dict(_point_from_args(args), "model point")

    series = load_dataset(by_id[dataset_id], base_dir)
    origin_time = datetime.fromisoformat(args.origin.replace("Z", "+00:00"))
    if origin_time.tzinfo is not None:
        origin_time = origin_time.astimezone(timezone.utc).replace(tzinfo=None)
    offset = (origin_time - series.start) / series.step
    if offset != int(offset) or not 0 <= int(offset) < len(series):
        raise ConfigError(
            f"origin {args.origin} is not a sample instant of dataset {dataset_id!r}"
        )
    origin = int(offset)
    needed = point.training_days * SAMPLES_PER_DAY
    if origin + 1 < needed:
        earliest = series.time_at(needed - 1)
        raise ConfigError(
            f"insufficient history before {args.origin}: earliest feasible origin "
            f"for {point.training_days} training days is {earliest.isoformat()}Z"
        )

    search_config = config.search_config()
    step_s = np.timedelta64(int(series.step.total_seconds()), "s")
    mids = (
        np.datetime64(series.start, "s")
        + np.arange(len(series) + search_config.horizon) * step_s
        + step_s // 2
    )
    extraterrestrial = extraterrestrial_irradiance(series.location, mids)
    if point.preprocessing == "transmissivity":
        units = to_transmissivity(series, extraterrestrial[: len(series)]).values
    else:
        units = series.values
    train_begin = origin + 1 - needed
    train_mask = apply_night_policy(series, NightPolicy(point.night_policy))[
        train_begin : origin + 1
    ]
    model = _fit_model(units[train_begin : origin + 1], train_mask, point, search_config)
    preds = recursive_forecast_matrix(
        model,
        units[train_begin : origin + 1],
        np.array([origin - train_begin]),
        search_config.horizon,
    )[0]
    targets = origin + 1 + np.arange(search_config.horizon)
    if point.preprocessing == "transmissivity":
        preds = from_transmissivity(preds, extraterrestrial[targets])

    stamps = [series.time_at(int(t)) for t in targets]
    for stamp, value in zip(stamps, preds):
        print(f"{stamp.isoformat()}Z\t{value:.3f}")
    if args.out:
        with open(args.out, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["timestamp", "ghi_wm2"])
            for stamp, value in zip(stamps, preds):
                writer.writerow(
                    [stamp.isoformat() + "Z", "" if math.isnan(value) else repr(float(value))]
                )
        print(f"wrote forecast to {args.out}", file=sys.stderr)
    return 0


def cmd_search(args) -> int:
    config = load_run_config(args.config)
    overrides = {}
    if args.grid:
        overrides["grid"] = args.grid
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.timeout_secs is not None:
        overrides["timeout_secs"] = args.timeout_secs
    if args.out:
        overrides["out_dir"] = args.out
    if overrides:
        from dataclasses import replace

        config = replace(config, **overrides)
        if config.grid == "explicit" and not config.points:
            raise ConfigError("grid 'explicit' requires points in the config file")

    base_dir = Path(args.config).parent
    datasets = {ds.id: load_dataset(ds, base_dir) for ds in config.datasets}
    grid = grid_from_config(config)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    total = len(grid) * len(datasets)
    print(
        f"search: {len(grid)} points x {len(datasets)} datasets "
        f"({config.workers} workers)",
        file=sys.stderr,
    )

    def progress(done: int, total_tasks: int) -> None:
        if done % max(1, total_tasks // 20) == 0 or done == total_tasks:
            print(f"  {done}/{total_tasks} evaluations done", file=sys.stderr)

    records = run_search(datasets, grid, config.search_config(), progress=progress)
    results_path = out_dir / "results.csv"
    summary_path = out_dir / "summary.csv"
    persist_results(records, results_path)
    rows = summarize(records, "method")
    write_summary_csv(rows, summary_path)

    n_ok = sum(1 for r in records if r.status == "ok")
    print(f"{n_ok}/{total} evaluations ok -> {results_path}", file=sys.stderr)
    header = f"{'method':>12s} {'step':>4s} {'count':>6s} {'min':>10s} {'median':>10s} {'q3':>10s}"
    print(header)
    for row in rows:
        s = row.stats
        print(
            f"{row.group_key:>12s} {row.step:>4d} {s.count:>6d} "
            f"{s.minimum:>10.3f} {s.median:>10.3f} {s.q3:>10.3f}"
        )
    return 0


def cmd_summarize(args) -> int:
    from .search import load_results

    records = load_results(args.results)
    steps = tuple(int(s) for s in args.steps.split(","))
    rows = summarize(records, args.group_by, steps=steps)
    write_summary_csv(rows, args.out)
    print(f"wrote {len(rows)} summary rows to {args.out}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="solarcast",
        description="Short-term solar irradiance forecasting and hyperparameter search",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="ingest 1-min or 15-min CSV, write 15-min CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    _location_args(p)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("synth", help="write a seeded synthetic 1-min irradiance CSV")
    p.add_argument("--output", required=True)
    p.add_argument("--days", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start", help="ISO start instant (default 2021-04-01T00:00Z)")
    _location_args(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("forecast", help="12-step forecast from one origin")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset", help="dataset id (default: first in config)")
    p.add_argument("--origin", required=True, help="ISO timestamp of the forecast origin")
    p.add_argument("--method", required=True,
                   choices=["persistence", "arima", "sarima", "nnr", "snnr"])
    for flag in ("p", "d", "q", "P", "D", "Q", "k", "training-days"):
        p.add_argument(f"--{flag}", type=int, dest=flag.replace("-", "_"))
    p.add_argument("--epsilon", type=float)
    p.add_argument("--weight-mode", choices=["uniform", "inverse_distance"])
    p.add_argument("--preprocessing", choices=["irradiance", "transmissivity"])
    p.add_argument("--night-policy",
                   choices=["all_day_and_night", "clock_window", "sun_above_horizon"])
    p.add_argument("--out", help="also write the forecast to this CSV path")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("search", help="run the hyperparameter sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--grid", choices=["full", "reduced", "explicit"])
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--timeout-secs", type=float)
    p.add_argument("--out", help="output directory (overrides config out_dir)")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("summarize", help="group results and write BoxStats CSV")
    p.add_argument("--results", required=True)
    p.add_argument("--group-by", default="method")
    p.add_argument("--steps", default="1,4,12")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_summarize)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SolarcastError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # internal invariant violation
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
