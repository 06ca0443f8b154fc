"""fellerlab command line: list, defaults, run, plot."""
from __future__ import annotations

import argparse
import multiprocessing
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import defaults_text, load_file, resolve
from .errors import FellerLabError, SpecValidationError
from .experiments import CATALOG, list_experiments, validate
from .report import OUT_ENV, default_out_dir, emit_plot_data, run_experiment


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fellerlab", description="Feller measure and Douglas integral laboratory")
    sub = ap.add_subparsers(dest="cmd", required=True)
    ls = sub.add_parser("list", help="show the experiment catalog")
    ls.add_argument("--geometry", help="only experiments on this boundary (interval, circle, sphere)")
    ls.add_argument("--acceptance", action="store_true", help="only the acceptance experiments")
    sub.add_parser("defaults", help="print every default as a key = value config")
    run = sub.add_parser("run", help="run an experiment, or 'all', or 'acceptance'")
    run.add_argument("name")
    run.add_argument("--config", help="key = value file or a JSON report to re-run")
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./fellerlab-out)")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one value")
    run.add_argument("--jobs", type=int, default=1, help="run this many experiments concurrently")
    pl = sub.add_parser("plot", help="write columnar plot data from a JSON report")
    pl.add_argument("report")
    pl.add_argument("--out")
    return ap


def _select(name: str) -> list[str]:
    if name == "all":
        return list(CATALOG)
    if name == "acceptance":
        return [s.name for s in CATALOG.values() if s.acceptance is not None]
    if name not in CATALOG:
        raise SpecValidationError(f"unknown experiment {name!r}; see 'fellerlab list'")
    return [name]


def _run_one(args):
    name, params, seed, out = args
    rep = run_experiment(CATALOG[name], params, seed, out)
    return name, rep.status, rep.runtime_s


def cmd_run(a) -> int:
    names = _select(a.name)
    overrides = load_file(a.config) if a.config else {}
    for item in a.set:
        if "=" not in item:
            raise SpecValidationError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    if a.seed is not None:
        overrides["seed"] = str(a.seed)
    seed, params = resolve(names, overrides)
    for n in names:
        validate(CATALOG[n], params[n], seed)
    out = Path(a.out) if a.out else default_out_dir()
    jobs = [(n, params[n], seed, out) for n in names]
    if a.jobs > 1:
        # spawn, not fork: forking after numba has started its OpenMP pool aborts the child
        with ProcessPoolExecutor(max_workers=a.jobs, mp_context=multiprocessing.get_context("spawn")) as ex:
            results = list(ex.map(_run_one, jobs))
    else:
        results = []
        for j in jobs:
            results.append(_run_one(j))
            print(f"{results[-1][1]}  {results[-1][0]}  ({results[-1][2]:.1f} s)", flush=True)
    if a.jobs > 1:
        for name, status, rt in results:
            print(f"{status}  {name}  ({rt:.1f} s)")
    print(f"reports in {out}")
    return 0 if all(s == "PASS" for _, s, _ in results) else 1


def main(argv=None) -> int:
    a = _parser().parse_args(argv)
    try:
        if a.cmd == "list":
            for s in list_experiments(a.geometry):
                if a.acceptance and s.acceptance is None:
                    continue
                tag = f"[{s.acceptance}]" if s.acceptance else "   "
                print(f"{s.name:28s} {tag:4s} {s.geometry:9s} {s.route:12s} {s.ref}")
            return 0
        if a.cmd == "defaults":
            sys.stdout.write(defaults_text())
            return 0
        if a.cmd == "run":
            return cmd_run(a)
        if a.cmd == "plot":
            for f in emit_plot_data(a.report, a.out):
                print(f)
            return 0
    except SpecValidationError as e:
        print(f"invalid specification: {e}", file=sys.stderr)
        return 2
    except FellerLabError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
