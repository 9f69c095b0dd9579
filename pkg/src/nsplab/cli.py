"""``nsp`` command line runner.

    nsp <experiment> [--config FILE] [--out DIR] [--seed N] [--override key=value]...

Exit status: 0 when every verdict passes, 1 when any verdict fails, 2 on a
configuration or runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import EXPERIMENT_NAMES, SCHEMA_VERSION, load_file, resolve
from .exceptions import ConfigError, IntegrationAborted, NspError
from .experiments import ExperimentResult, run_experiment

MANIFEST_VERSION = 1


def fmt(x) -> str:
    """17 significant digits for floats; everything else via str."""
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _dumps(obj) -> str:
    """JSON text; floats use the shortest repr that round-trips exactly."""
    return json.dumps(_jsonable(obj), indent=2)


def write_csv(path: Path, columns: dict) -> None:
    names = list(columns)
    rows = zip(*[columns[n] for n in names]) if names else []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_rows(path: Path, rows: list) -> None:
    names = []
    for r in rows:
        for k in r:
            if k not in names:
                names.append(k)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for r in rows:
            w.writerow([fmt(r.get(k, "")) for k in names])


def read_csv(path: Path) -> dict:
    """Inverse of write_csv: column name -> list of floats."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        names = next(reader)
        cols = {n: [] for n in names}
        for row in reader:
            for n, v in zip(names, row):
                cols[n].append(float(v))
    return cols


def write_outputs(out: Path, cfg: dict, result: ExperimentResult) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "norms.csv", result.columns)
    fits = {"experiment": result.name, "fits": result.fits, "verdicts": result.verdicts,
            "summary": result.summary, "passed": result.passed}
    (out / "fits.json").write_text(_dumps(fits) + "\n")
    if result.energy_rows:
        write_rows(out / "energy.csv", result.energy_rows)
    plot = out / "plotdata"
    plot.mkdir(exist_ok=True)
    names = list(result.columns)
    if names:
        x = names[0]
        for n in names[1:]:
            write_csv(plot / f"{n}.csv", {x: result.columns[x], n: result.columns[n]})


def write_manifest(out: Path, cfg: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "schema_version": SCHEMA_VERSION,
        "code_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "config": cfg,
    }
    (out / "manifest.json").write_text(_dumps(manifest) + "\n")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nsp", description="Navier-Stokes-Poisson decay laboratory")
    p.add_argument("experiment", choices=EXPERIMENT_NAMES)
    p.add_argument("--config", type=Path, help="YAML/JSON config file or a previous run's manifest.json")
    p.add_argument("--out", type=Path, default=None, help="output directory (default runs/<experiment>)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="set a config field, e.g. data.delta=5e-3 (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    out = args.out or Path("runs") / args.experiment
    try:
        file_cfg = load_file(args.config) if args.config else {}
        cfg = resolve(args.experiment, file_cfg, args.override, args.seed)
    except ConfigError as exc:
        for field, msg in exc.problems.items():
            print(f"config error: {field}: {msg}", file=sys.stderr)
        return 2
    try:
        write_manifest(out, cfg)
        result = run_experiment(cfg, out)
    except IntegrationAborted as exc:
        print(f"run aborted at t={exc.last_time}: {exc.reason}", file=sys.stderr)
        if exc.checkpoint:
            print(f"checkpoint: {exc.checkpoint}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        for field, msg in exc.problems.items():
            print(f"config error: {field}: {msg}", file=sys.stderr)
        return 2
    except (NspError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    write_outputs(out, cfg, result)
    for name, ok in result.verdicts.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    print(f"outputs written to {out}")
    return 0 if result.passed else 1


if __name__ == "__main__":
    sys.exit(main())
