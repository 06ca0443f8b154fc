import math

import numpy as np

from fellerlab.geometry import Geometry
from fellerlab.mc.config import PathConfig
from fellerlab.mc.io import DELTA_TOKEN, read_csv, write_excursions, write_jumps
from fellerlab.mc.paths import (ExcursionRecord, build_local_time, decompose_excursions, simulate_reflected_path,
                                time_change)


def test_excursion_csv_round_trip(tmp_path):
    disk = Geometry.disk()
    recs = [ExcursionRecord(3, 0.1, 0.30000000000000004, 1.0, 2.5, 1, 3)]
    rows = read_csv(write_excursions(tmp_path / "e.csv", disk, recs))
    assert list(rows[0]) == ["path_id", "s_start", "s_end", "start_x", "start_y", "end_x", "end_y"]
    assert rows[0]["path_id"] == "3"
    assert float(rows[0]["s_end"]) == 0.30000000000000004
    assert float(rows[0]["start_x"]) == math.cos(1.0)
    assert float(rows[0]["end_y"]) == math.sin(2.5)


def test_escape_record_written_as_delta(tmp_path):
    ext = Geometry.ball_exterior(3, 1.0)
    recs = [ExcursionRecord(0, 0.5, 0.9, np.array([0.0, 0.0, 1.0]), None, 5, 9)]
    rows = read_csv(write_excursions(tmp_path / "e.csv", ext, recs))
    assert [rows[0][f"end_x{i}"] for i in range(3)] == [DELTA_TOKEN] * 3
    assert float(rows[0]["start_x2"]) == 1.0


def test_jump_csv_matches_paths(tmp_path):
    iv = Geometry.interval()
    cfg = PathConfig(dt=1e-4, horizon=1.0, seed=3)
    ys = []
    for i in range(3):
        p = simulate_reflected_path(iv, None, cfg, i)
        ys.append(time_change(p, build_local_time(p, cfg), cfg, records=decompose_excursions(p, cfg)))
    rows = read_csv(write_jumps(tmp_path / "j.csv", iv, ys))
    assert len(rows) == sum(len(y.jumps) for y in ys)
    flat = [j for y in ys for j in y.jumps]
    for row, j in zip(rows, flat):
        assert float(row["boundary_time"]) == j.boundary_time
        assert float(row["from_x"]) == j.from_point and float(row["jump_size"]) == 1.0


def test_empty_jump_file_has_header(tmp_path):
    path = write_jumps(tmp_path / "j.csv", Geometry.disk(), [])
    assert path.read_text().strip() == "path_id,boundary_time,from_x,from_y,to_x,to_y,jump_size"
