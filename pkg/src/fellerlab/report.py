"""Verification reports and plot-data emission."""
from __future__ import annotations

import json
import math
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import CATALOG, ExperimentSpec

OUT_ENV = "FELLERLAB_OUT"


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_ENV, "fellerlab-out"))


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


@dataclass
class VerificationReport:
    experiment: str
    ref: str
    geometry: str
    route: str
    policy: str
    status: str
    checks: list
    values: dict
    runtime_s: float
    seed: int
    config: dict
    artifacts: list = field(default_factory=list)
    plots: dict = field(default_factory=dict)
    version: str = __version__

    @property
    def passed(self) -> bool:
        return self.status == "PASS"

    @property
    def targets(self) -> dict:
        return {c["name"]: {"value": c["target"], "provenance": c["provenance"]} for c in self.checks}

    @property
    def gaps(self) -> dict:
        return {c["name"]: c["gap"] for c in self.checks}

    def as_dict(self) -> dict:
        d = asdict(self)
        d["targets"] = self.targets
        d["gaps"] = self.gaps
        return _jsonable(d)

    def filename(self) -> str:
        return f"{self.experiment}-{self.seed}.json"

    def write(self, out_dir) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / self.filename()
        path.write_text(json.dumps(self.as_dict(), indent=2) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "VerificationReport":
        d = json.loads(Path(path).read_text())
        d.pop("targets", None)
        d.pop("gaps", None)
        return cls(**d)


def run_experiment(spec: ExperimentSpec | str, params: dict | None = None, seed: int = 1,
                   out_dir=None) -> VerificationReport:
    """Run one experiment, write its JSON report (and CSV artifacts) and return the report."""
    if isinstance(spec, str):
        spec = CATALOG[spec]
    p = dict(spec.defaults) if params is None else dict(params)
    from .experiments import validate
    validate(spec, p, seed)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    outcome = spec.runner(p, seed, out)
    runtime = time.perf_counter() - t0
    checks = [c.as_dict() for c in outcome.checks]
    status = "PASS" if checks and all(c["passed"] for c in checks) else "FAIL"
    plots = {k: {"columns": list(cols), "rows": [list(r) for r in rows]}
             for k, (cols, rows) in outcome.plots.items()}
    rep = VerificationReport(spec.name, spec.ref, spec.geometry, spec.route, spec.policy, status, checks,
                             _jsonable(outcome.values), runtime, int(seed), _jsonable(p),
                             list(outcome.artifacts), _jsonable(plots))
    if out is not None:
        rep.write(out)
    return rep


def write_columns(path, columns, rows) -> Path:
    """Whitespace-separated columns with a '#' header; header only when there are no rows."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write("# " + " ".join(columns) + "\n")
        for r in rows:
            fh.write(" ".join(v if isinstance(v, str) else f"{float(v):.17g}" for v in r) + "\n")
    return path


def emit_plot_data(report, out_dir=None) -> list[Path]:
    """Write every plot series of a report (object or JSON path) as a columnar text file."""
    if not isinstance(report, VerificationReport):
        src = Path(report)
        report = VerificationReport.load(src)
        out_dir = src.parent if out_dir is None else out_dir
    out_dir = Path(out_dir if out_dir is not None else default_out_dir())
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for name, series in report.plots.items():
        files.append(write_columns(out_dir / f"{report.experiment}-{report.seed}-{name}.dat",
                                   series["columns"], series["rows"]))
    return files


def emit_census_histogram(path, bins, empirical, analytic, lo=None, hi=None) -> Path:
    """Per-bin empirical and analytic jump rates; an empty census gives a header-only file."""
    cols = ["bin", "empirical", "analytic", "ci_lo", "ci_hi"]
    rows = []
    if len(empirical):
        lo = empirical if lo is None else lo
        hi = empirical if hi is None else hi
        rows = [(str(b), e, a, l, h) for b, e, a, l, h in zip(bins, empirical, analytic, lo, hi)]
    return write_columns(path, cols, rows)
