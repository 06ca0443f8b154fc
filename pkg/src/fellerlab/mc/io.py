"""CSV output for excursion records and jumps of the time-changed process."""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from ..geometry import Geometry

DELTA_TOKEN = "DELTA"


def _coords(geom: Geometry, point) -> list[float]:
    if geom.kind == "interval":
        return [float(point)]
    if geom.boundary == "circle":
        return [math.cos(float(point)), math.sin(float(point))]
    return [float(v) for v in np.asarray(point)]


def _axes(geom: Geometry) -> list[str]:
    if geom.kind == "interval":
        return ["x"]
    if geom.boundary == "circle":
        return ["x", "y"]
    return [f"x{i}" for i in range(geom.d)]


def fmt(v: float) -> str:
    return f"{v:.17g}"


def write_excursions(path, geom: Geometry, records) -> Path:
    path = Path(path)
    ax = _axes(geom)
    header = ["path_id", "s_start", "s_end"] + [f"start_{a}" for a in ax] + [f"end_{a}" for a in ax]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in records:
            row = [str(r.path_id), fmt(r.s_start), fmt(r.s_end)]
            row += [fmt(c) for c in _coords(geom, r.start_point)]
            if r.escaped:
                row += [DELTA_TOKEN] * len(ax)
            else:
                row += [fmt(c) for c in _coords(geom, r.end_point)]
            w.writerow(row)
    return path


def write_jumps(path, geom: Geometry, ys) -> Path:
    path = Path(path)
    ax = _axes(geom)
    header = ["path_id", "boundary_time"] + [f"from_{a}" for a in ax] + [f"to_{a}" for a in ax] + ["jump_size"]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for y in ys:
            for j in y.jumps:
                row = [str(y.path_id), fmt(j.boundary_time)]
                row += [fmt(c) for c in _coords(geom, j.from_point)]
                row += [fmt(c) for c in _coords(geom, j.to_point)]
                row.append(fmt(j.size))
                w.writerow(row)
    return path


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))
