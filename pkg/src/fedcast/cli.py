"""Command-line front end: prepare data, synthesize households, run, report.

Commands:
    fedcast prepare    clean meter/weather CSVs into a dataset cache
    fedcast synthesize generate a synthetic population in the CSV format
    fedcast run        execute a scenario sweep from a JSON config
    fedcast report     aggregate one or more run directories into tables

Every command is deterministic given its inputs and seed.  Run output lands
in out/<run-id>/ where run-id is a digest of the resolved config and the
dataset identity, so reruns of the same config land in the same directory
and reproduce results.json byte for byte.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure while
training.
"""

from __future__ import annotations

import os

# Pin BLAS to one thread before numpy loads: keeps reductions bitwise
# reproducible regardless of host core count and avoids oversubscription
# when --jobs forks worker processes.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS",
             "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
    os.environ[_var] = "1"

import argparse
import hashlib
import itertools
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    dataset_digest,
    generate_synthetic_households,
    household_datasets,
    ingest_meter_csv,
    ingest_weather_csv,
    load_cache,
    prepare_datasets,
    write_cache,
    write_meter_csv,
    write_weather_csv,
)
from .errors import DataError, NumericalError, ValidationError
from .federation import ScenarioConfig, run_scenario
from .reporting import emit_report, render_tables, build_comparison

SEED_ENV = "FEDCAST_SEED"

# Config keys that expand into sweep grids when given as lists.
_GRID_KEYS = ("client_fraction", "local_epochs", "hc_threshold", "hc_linkage",
              "hc_rounds")
_SCENARIO_KEYS = {
    "centralised": (),
    "localised": (),
    "fl": ("client_fraction", "local_epochs"),
    "fl_lft": ("client_fraction", "local_epochs"),
    "fl_hc": ("client_fraction", "local_epochs", "hc_threshold", "hc_linkage",
              "hc_rounds"),
    "fl_hc_lft": ("client_fraction", "local_epochs", "hc_threshold",
                  "hc_linkage", "hc_rounds"),
}
_OVERRIDE_KEYS = ("batch_size", "learning_rate", "patience", "epochs_cap",
                  "fl_rounds_cap", "flhc_rounds_cap", "lft_epochs_cap")


def _aslist(value) -> list:
    return value if isinstance(value, list) else [value]


def resolve_config(raw: dict) -> tuple[int, list]:
    """Expand a run config into (seed, [ScenarioConfig...]).

    Scalar fields stand for singleton grids; list fields sweep.  The
    environment variable FEDCAST_SEED overrides the config seed.
    """
    known = {"data", "seed", "k", "weather", "scenarios", "overrides"}
    unknown = set(raw) - known
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    for key in ("data", "scenarios"):
        if key not in raw:
            raise ValidationError(f"config needs a {key!r} entry")
    if not isinstance(raw["data"], str):
        raise ValidationError("'data' must be a cache directory path")
    if not isinstance(raw["scenarios"], list):
        raise ValidationError("'scenarios' must be a list of sections")

    seed = raw.get("seed", 0)
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError:
            raise ValidationError(f"{SEED_ENV}={env_seed!r} is not an integer")
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ValidationError("seed must be a non-negative integer")

    overrides = raw.get("overrides", {})
    bad = set(overrides) - set(_OVERRIDE_KEYS)
    if bad:
        raise ValidationError(f"unknown override keys: {sorted(bad)}")

    k_values = [int(k) for k in _aslist(raw.get("k", 12))]
    weather_values = _aslist(raw.get("weather", False))
    if not all(isinstance(w, bool) for w in weather_values):
        raise ValidationError("weather must be true, false, or a list of those")

    entries = []
    for section in raw["scenarios"]:
        if "kind" not in section:
            raise ValidationError("every scenario section needs a 'kind'")
        kind = section["kind"]
        if kind not in _SCENARIO_KEYS:
            raise ValidationError(f"unknown scenario {kind!r}")
        allowed = _SCENARIO_KEYS[kind]
        bad = set(section) - {"kind"} - set(allowed)
        if bad:
            raise ValidationError(f"{kind}: unexpected keys {sorted(bad)}")
        grids = [[(key, v) for v in _aslist(section[key])]
                 for key in allowed if key in section]
        for combo in itertools.product(*grids):
            for k, weather in itertools.product(k_values, weather_values):
                entries.append(ScenarioConfig(
                    kind=kind, k=k, with_weather=weather, seed=seed,
                    **dict(combo), **overrides))
    if not entries:
        raise ValidationError("config expands to no scenario entries")
    ids = [cfg.entry_id for cfg in entries]
    dupes = sorted({e for e in ids if ids.count(e) > 1})
    if dupes:
        raise ValidationError(f"config expands to duplicate entries: {dupes}")
    return seed, sorted(entries, key=lambda c: c.entry_id)


def run_identity(seed: int, entries, data_digest: str) -> str:
    blob = json.dumps(
        {"seed": seed, "data": data_digest,
         "entries": [cfg.to_dict() for cfg in entries]},
        sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


# Worker-side caches: one load per process, reused across sweep entries.
_PREP_CACHE: dict = {}
_DATASET_CACHE: dict = {}


def _entry_datasets(cache_dir: str, k: int, with_weather: bool) -> list:
    key = (cache_dir, k, with_weather)
    if key not in _DATASET_CACHE:
        if cache_dir not in _PREP_CACHE:
            _PREP_CACHE[cache_dir], _ = load_cache(cache_dir)
        _DATASET_CACHE[key] = household_datasets(
            _PREP_CACHE[cache_dir], k, with_weather)
    return _DATASET_CACHE[key]


def _run_entry(cache_dir: str, cfg_fields: dict):
    cfg = ScenarioConfig(**cfg_fields)
    datasets = _entry_datasets(cache_dir, cfg.k, cfg.with_weather)
    return run_scenario(datasets, cfg)


def _write_entry_outputs(out: Path, entry_id: str, report: dict,
                         models: dict) -> list:
    files = []
    log_rel = f"logs/{entry_id}.json"
    log_path = out / log_rel
    log_path.parent.mkdir(parents=True, exist_ok=True)
    with log_path.open("w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    files.append(log_rel)
    for name in sorted(models):
        rel = f"models/{entry_id}/{name}.npy"
        (out / rel).parent.mkdir(parents=True, exist_ok=True)
        np.save(out / rel, np.asarray(models[name], dtype=np.float64))
        files.append(rel)
    return files


def cmd_prepare(args) -> int:
    try:
        ks = [int(part) for part in args.k.split(",") if part]
    except ValueError:
        raise ValidationError(f"bad --k value: {args.k!r}")
    with_weather = args.weather_variant != "without"
    if with_weather and not args.weather:
        raise DataError("--weather-variant %s needs --weather" % args.weather_variant)
    if not Path(args.meters).is_file():
        raise DataError(f"meter file not found: {args.meters}")
    readings, skipped_m = ingest_meter_csv(args.meters)
    weather = None
    if with_weather:
        if not Path(args.weather).is_file():
            raise DataError(f"weather file not found: {args.weather}")
        weather, skipped_w = ingest_weather_csv(args.weather)
        if skipped_w:
            print(f"note: skipped {skipped_w} malformed weather rows",
                  file=sys.stderr)
    if skipped_m:
        print(f"note: skipped {skipped_m} malformed meter rows", file=sys.stderr)
    prep = prepare_datasets(readings, weather, ks, with_weather)
    manifest = write_cache(prep, args.out)
    print(f"prepared {len(prep.households)} households "
          f"({len(manifest['datasets'])} datasets) -> {args.out}")
    print(f"dataset digest {dataset_digest(manifest)}")
    return 0


def cmd_synthesize(args) -> int:
    start = None
    if args.start:
        try:
            start = datetime.fromisoformat(args.start)
        except ValueError:
            raise ValidationError(f"bad --start date: {args.start!r}")
    pop = generate_synthetic_households(
        args.n, archetypes=args.archetypes, noise=args.noise,
        seed=args.seed, days=args.days, start=start)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_meter_csv(out / "meters.csv", pop.households)
    write_weather_csv(out / "weather.csv", pop.weather)
    with (out / "archetypes.json").open("w") as fh:
        json.dump({"names": list(pop.archetype_names),
                   "assignment": pop.archetype_of}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(pop.households)} households to {out}")
    return 0


def cmd_run(args) -> int:
    config_path = Path(args.config)
    if not config_path.is_file():
        raise DataError(f"config file not found: {config_path}")
    try:
        raw = json.loads(config_path.read_text())
    except json.JSONDecodeError as err:
        raise ValidationError(f"{config_path}: not valid JSON ({err})")
    seed, entries = resolve_config(raw)

    data_dir = Path(raw["data"])
    if not data_dir.is_absolute():
        data_dir = (config_path.parent / data_dir).resolve()
    prep, cache_manifest = load_cache(data_dir)
    digest = dataset_digest(cache_manifest)

    run_id = run_identity(seed, entries, digest)
    out = Path(args.out) / run_id
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()

    files = []
    reports = []
    try:
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                futures = {
                    cfg.entry_id: pool.submit(_run_entry, str(data_dir),
                                              cfg.to_dict())
                    for cfg in entries
                }
                for entry_id in sorted(futures):
                    report, models = futures[entry_id].result()
                    files += _write_entry_outputs(out, entry_id, report, models)
                    reports.append(report)
        else:
            for cfg in entries:
                report, models = _run_entry(str(data_dir), cfg.to_dict())
                files += _write_entry_outputs(out, cfg.entry_id, report, models)
                reports.append(report)
    except NumericalError as err:
        # Flush what we have for post-mortem before reporting failure.
        with (out / "failure.json").open("w") as fh:
            json.dump({"error": str(err), "param_index": err.param_index,
                       "completed": [r["entry_id"] for r in reports]},
                      fh, indent=2, sort_keys=True)
            fh.write("\n")
        raise

    emit_report(reports, out, run_meta={
        "seed": seed, "run_id": run_id, "data_digest": digest})
    files += ["results.json", "results.csv", "tables.txt"]

    manifest = {
        "tool_version": __version__,
        "run_id": run_id,
        "seed": seed,
        "data_digest": digest,
        "config": {"data": str(data_dir),
                   "entries": [cfg.to_dict() for cfg in entries]},
        "files": sorted(files) + ["manifest.json"],
        "wall_clock_seconds": round(time.time() - started, 3),
    }
    with (out / "manifest.json").open("w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"run {run_id}: {len(entries)} entries -> {out}")
    print((out / "tables.txt").read_text(), end="")
    return 0


def cmd_report(args) -> int:
    reports = []
    digests = {}
    seen = {}
    for run_dir in args.dirs:
        run = Path(run_dir)
        results = run / "results.json"
        manifest = run / "manifest.json"
        if not results.is_file() or not manifest.is_file():
            raise DataError(f"{run}: not a run directory")
        digests[str(run)] = json.loads(manifest.read_text())["data_digest"]
        for report in json.loads(results.read_text())["entries"]:
            entry_id = report["entry_id"]
            if entry_id in seen:
                raise DataError(
                    f"duplicate entry {entry_id!r} in {run} and {seen[entry_id]}")
            seen[entry_id] = str(run)
            reports.append(report)
    if len(set(digests.values())) > 1:
        detail = ", ".join(f"{d}: {g[:12]}" for d, g in sorted(digests.items()))
        raise DataError(f"runs were made from different datasets ({detail})")

    meta = {"data_digest": next(iter(digests.values())),
            "source_runs": sorted(digests),
            "seeds": sorted({r["seed"] for r in reports})}
    if args.out:
        emit_report(reports, args.out, run_meta=meta)
        print(f"aggregated {len(reports)} entries -> {args.out}")
    print(render_tables(build_comparison(reports)), end="")
    return 0


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedcast",
        description="Energy-demand forecasting under six training regimes.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="clean CSVs into a dataset cache")
    p.add_argument("--meters", required=True, help="meter readings CSV")
    p.add_argument("--weather", help="weather CSV (hourly)")
    p.add_argument("--out", required=True, help="cache directory to write")
    p.add_argument("--k", default="6,12,24",
                   help="comma-separated window lengths (default 6,12,24)")
    p.add_argument("--weather-variant", choices=("both", "with", "without"),
                   default="both", help="which feature variants to prepare")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("synthesize", help="generate a synthetic population")
    p.add_argument("--n", type=int, required=True, help="number of households")
    p.add_argument("--archetypes", type=int, default=3)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--days", type=int, default=90)
    p.add_argument("--start", help="first day, ISO date (default 2013-01-01)")
    p.add_argument("--out", required=True, help="directory for the CSVs")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("run", help="execute a scenario sweep")
    p.add_argument("--config", required=True, help="JSON run config")
    p.add_argument("--out", required=True, help="parent directory for runs")
    p.add_argument("--jobs", type=int, default=1,
                   help="concurrent sweep entries (default 1)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="aggregate run directories")
    p.add_argument("dirs", nargs="+", help="run directories to aggregate")
    p.add_argument("--out", help="directory for the combined report")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, DataError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except NumericalError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
