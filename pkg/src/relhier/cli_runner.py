"""Command-line front end: load a scenario config, run verification suites,
write a JSON report (and optionally a CSV table).

Exit status: 0 if every check passes, 1 if any check fails or errors,
2 for configuration problems or unknown suites.
"""
from __future__ import annotations

import argparse
import copy
import csv
import datetime as _dt
import fnmatch
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import resources

import numpy as np
import yaml

from .errors import ConfigError
from .suites import SUITES

__all__ = ["load_config", "select_suites", "list_suites", "run", "main"]

log = logging.getLogger("relhier")

JOBS_ENV = "RELHIER_JOBS"


def _default_config_text():
    return resources.files("relhier").joinpath("default_config.yaml").read_text()


def _validate(cfg):
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping")
    if not isinstance(cfg.get("seed", 0), int) or isinstance(cfg.get("seed", 0), bool):
        raise ConfigError("seed must be an integer")
    c = cfg.get("c", 1.0)
    if not isinstance(c, (int, float)) or not c > 0:
        raise ConfigError("c must be a positive number")
    if cfg.get("units", "dimensionless") not in ("dimensionless", "SI"):
        raise ConfigError("units must be 'dimensionless' or 'SI'")
    tols = cfg.get("tolerances") or {}
    if not isinstance(tols, dict):
        raise ConfigError("tolerances must map check-id globs to numbers")
    for pat, tol in tols.items():
        if isinstance(tol, bool) or not isinstance(tol, (int, float)) or not np.isfinite(tol) or tol < 0:
            raise ConfigError(f"tolerance for {pat!r} must be a non-negative number")
    suites = cfg.get("suites") or {}
    if not isinstance(suites, dict):
        raise ConfigError("suites must be a mapping of suite blocks")
    for name, block in suites.items():
        if name not in SUITES:
            raise ConfigError(f"config refers to unknown suite {name!r}")
        if block is not None and not isinstance(block, dict):
            raise ConfigError(f"block for suite {name!r} must be a mapping")
    return cfg


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path=None):
    """Default config, overlaid with the YAML file at ``path`` if given."""
    base = yaml.safe_load(_default_config_text())
    if path is None:
        return _validate(base)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            user = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    if user is None:
        user = {}
    if not isinstance(user, dict):
        raise ConfigError("config must be a mapping")
    return _validate(_merge(base, user))


def select_suites(pattern, registry=None):
    """Suite names matching a comma-separated list of globs, in registry order."""
    registry = SUITES if registry is None else registry
    pats = [p.strip() for p in str(pattern).split(",") if p.strip()]
    chosen = [n for n in registry if any(fnmatch.fnmatchcase(n, p) for p in pats)]
    for p in pats:
        if not any(fnmatch.fnmatchcase(n, p) for n in registry):
            raise ConfigError(f"no suite matches {p!r}")
    return chosen


def list_suites(pattern="*", registry=None):
    registry = SUITES if registry is None else registry
    names = [n for n in registry if fnmatch.fnmatchcase(n, pattern)]
    return [(n, registry[n][0]) for n in names]


def _tolerance(check_id, default, overrides):
    tol = default
    for pat, val in overrides.items():
        if fnmatch.fnmatchcase(check_id, pat):
            tol = float(val)
    return tol


def _run_one(args):
    name, block, seed, index = args
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))
    t0 = time.perf_counter()
    try:
        records = SUITES[name][1](block, rng)
        error = None
    except Exception as exc:  # reported as a failing check
        records = []
        error = f"{type(exc).__name__}: {exc}"
    return name, records, error, time.perf_counter() - t0


def _jobs(requested):
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get(JOBS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{JOBS_ENV} must be an integer") from None
    return 1


def run(config=None, suite="*", out=None, seed=None, jobs=None, csv_path=None):
    """Run the selected suites; returns (exit_status, report dict)."""
    cfg = config if isinstance(config, dict) else load_config(config)
    names = select_suites(suite)
    seed = int(cfg.get("seed", 0) if seed is None else seed)
    overrides = cfg.get("tolerances") or {}
    order = list(SUITES)
    tasks = []
    for name in names:
        block = dict((cfg.get("suites") or {}).get(name) or {})
        block.setdefault("c", cfg.get("c", 1.0))
        tasks.append((name, block, seed, order.index(name)))
    njobs = _jobs(jobs)
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    if njobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=njobs) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]

    checks, seconds = [], {}
    for name, records, error, secs in results:
        seconds[name] = round(secs, 6)
        if error is not None:
            checks.append({"check_id": f"{name}.error", "anchor": SUITES[name][0], "status": "ERROR",
                           "deviation": None, "tolerance": None, "detail": error})
            log.error("suite %s raised %s", name, error)
        for rec in records:
            tol = _tolerance(rec["check_id"], rec["tolerance"], overrides)
            dev = rec["deviation"]
            status = "PASS" if np.isfinite(dev) and dev <= tol else "FAIL"
            checks.append({"check_id": rec["check_id"], "anchor": rec["anchor"], "status": status,
                           "deviation": dev, "tolerance": tol, "suite": name})
    passed = sum(c["status"] == "PASS" for c in checks)
    body = {
        "scenario": cfg.get("name", "unnamed"),
        "seed": seed,
        "c": cfg.get("c", 1.0),
        "units": cfg.get("units", "dimensionless"),
        "suites": names,
        "checks": checks,
        "summary": {"total": len(checks), "passed": passed, "failed": len(checks) - passed},
    }
    report = {"body": body, "meta": {"started": started, "jobs": njobs, "suite_seconds": seconds}}
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if csv_path:
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["check_id", "anchor", "status", "deviation", "tolerance", "seconds"])
            for c in checks:
                w.writerow([c["check_id"], c["anchor"], c["status"], c["deviation"], c["tolerance"],
                            seconds.get(c["check_id"].split(".")[0])])
    status = 0 if passed == len(checks) else 1
    return status, report


def body_bytes(report):
    """Canonical serialization of the reproducible part of a report."""
    return json.dumps(report["body"], indent=2, sort_keys=True).encode()


def _print_checks(report, stream):
    for c in report["body"]["checks"]:
        dev = "-" if c["deviation"] is None else f"{c['deviation']:.3e}"
        tol = "-" if c["tolerance"] is None else f"{c['tolerance']:.1e}"
        stream.write(f"{c['status']:5s} {c['check_id']:40s} dev={dev} tol={tol}\n")
        if c.get("detail"):
            stream.write(f"      {c['detail']}\n")
    s = report["body"]["summary"]
    stream.write(f"{s['passed']}/{s['total']} checks passed\n")


def _parser():
    p = argparse.ArgumentParser(prog="relhier", description="Numerical verification suites for moment hierarchies.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run verification suites")
    r.add_argument("--config", default=None, help="YAML scenario file (default: packaged config)")
    r.add_argument("--suite", default="*", help="suite name glob, comma separated")
    r.add_argument("--out", default=None, help="JSON report path")
    r.add_argument("--csv", default=None, help="optional CSV table path")
    r.add_argument("--seed", type=int, default=None, help="override the config seed")
    r.add_argument("--jobs", type=int, default=None, help=f"worker processes (env {JOBS_ENV})")
    r.add_argument("--quiet", action="store_true")
    ls = sub.add_parser("list-suites", help="list available suites")
    ls.add_argument("pattern", nargs="?", default="*")
    return p


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    if args.command == "list-suites":
        for name, anchor in list_suites(args.pattern):
            print(f"{name:12s} {anchor}")
        return 0
    try:
        status, report = run(args.config, args.suite, args.out, args.seed, args.jobs, args.csv)
    except ConfigError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    if not args.quiet:
        _print_checks(report, sys.stdout)
    return status


def main_entry():
    sys.exit(main())
