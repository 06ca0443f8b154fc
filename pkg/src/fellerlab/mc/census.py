"""Monte Carlo estimators built on the fused census kernels."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from ..boundary import (Arcs, Band, BoundaryFunction, Constant, Endpoints, arc_gap,
                        as_boundary_function, simplify)
from ..errors import (EstimatorInvalidError, InstabilityError, SpecValidationError,
                      TruncationDominatedError, UnsupportedDataError)
from ..geometry import Geometry
from . import kernels
from .config import PathConfig
from .paths import layer_normalization, ratio_estimate
from .rng import ZIG_FI, ZIG_KI, ZIG_WI

Z95 = 1.959963984540054

#: Local-time calibration constant, fixed once by ``calibrate_local_time`` on
#: the interval (dt = 1e-5, 4e4 paths, horizon 2, seed 20261015; standard
#: error 0.0035) and frozen for all geometries.
KAPPA_LT = 0.9943


@dataclass
class MCEstimate:
    value: float
    se: float
    n_paths: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def half_width(self) -> float:
        return Z95 * self.se

    @property
    def ci(self) -> tuple[float, float]:
        return self.value - self.half_width, self.value + self.half_width

    def covers(self, target: float) -> bool:
        lo, hi = self.ci
        return lo <= target <= hi

    def as_dict(self) -> dict:
        lo, hi = self.ci
        return {"value": self.value, "se": self.se, "ci_low": lo, "ci_high": hi,
                "half_width": self.half_width, "n_paths": self.n_paths, **self.diagnostics}


def _mean_se(v: np.ndarray) -> tuple[float, float]:
    v = np.asarray(v, dtype=float)
    if v.size < 2:
        return float(v.mean()), math.inf
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def _check_flags(flags: np.ndarray) -> dict:
    unstable = int(np.count_nonzero(flags & kernels.FLAG_UNSTABLE))
    if unstable:
        raise InstabilityError(f"{unstable} paths took a step more than 10 sqrt(dt) outside the domain")
    return {"unresolved_paths": int(np.count_nonzero(flags & kernels.FLAG_UNRESOLVED))}


# ---------------------------------------------------------------------------
# partitions of F into census cells

def circle_partition(*fs) -> np.ndarray:
    pts = []
    for f in fs:
        b = f.circle_breakpoints()
        if b is None:
            raise UnsupportedDataError("census data on the circle must be piecewise constant (arcs)")
        pts.append(b)
    return np.unique(np.concatenate(pts)) if pts else np.empty(0)


def cell_values_circle(f: BoundaryFunction, bps: np.ndarray) -> np.ndarray:
    if bps.size == 0:
        return np.atleast_1d(f(np.array([0.0])))
    ends = np.append(bps[1:], bps[0] + 2 * math.pi)
    return np.asarray(f(0.5 * (bps + ends)), dtype=float)


def zonal_partition(*fs) -> np.ndarray:
    pts = []
    for f in fs:
        b = f.zonal_breakpoints()
        if b is None:
            raise UnsupportedDataError("escape census data must be bands about the z-axis")
        pts.append(b)
    b = np.unique(np.concatenate(pts)) if pts else np.empty(0)
    return b[(b > -1.0) & (b < 1.0)]


def cell_values_zonal(f: BoundaryFunction, zb: np.ndarray) -> np.ndarray:
    edges = np.concatenate([[-1.0], zb, [1.0]])
    mids = 0.5 * (edges[:-1] + edges[1:])
    pts = np.zeros((mids.size, 3))
    pts[:, 2] = mids
    pts[:, 0] = np.sqrt(1.0 - mids ** 2)
    return np.asarray(f(pts), dtype=float)


def _support_arcs(f: BoundaryFunction, bps: np.ndarray, vals: np.ndarray):
    if bps.size == 0:
        return [(0.0, 2 * math.pi)] if vals[0] != 0 else []
    ends = np.append(bps[1:], bps[0] + 2 * math.pi)
    return [(s, e - s) for s, e, v in zip(bps, ends, vals) if v != 0]


# ---------------------------------------------------------------------------
# census runs

@dataclass
class CensusRun:
    geometry: Geometry
    cfg: PathConfig
    counts: np.ndarray        # (n_paths, cells, cells + 1); last column is the cemetery
    occupation: np.ndarray    # (n_paths, cells) layer time before the horizon
    cells: np.ndarray         # breakpoints (circle) or [0, 1] (interval)
    diagnostics: dict

    def local_time(self, kappa: float = KAPPA_LT) -> np.ndarray:
        """Per-path, per-cell boundary local time at the horizon."""
        return kappa * layer_normalization(self.geometry, self.cfg.eps_layer) * self.occupation

    @property
    def killed(self) -> int:
        """Number of excursions ending in the cemetery."""
        return int(self.counts[:, :, -1].sum())


def run_census(geom: Geometry, cfg: PathConfig, cells=None) -> CensusRun:
    """Simulate cfg.n_paths stationary paths and bin their excursions by (start cell, end cell)."""
    t0 = time.perf_counter()
    if geom.kind == "interval":
        counts, occ, flags = kernels.interval_census(cfg.seed, cfg.n_paths, cfg.dt, cfg.horizon,
                                                     cfg.eps_layer, cfg.cap_steps, cfg.noise,
                                                     ZIG_KI, ZIG_WI, ZIG_FI)
        cells = np.array([0.0, 1.0])
    elif geom.kind == "disk":
        cells = np.empty(0) if cells is None else np.unique(np.mod(np.asarray(cells, dtype=float), 2 * math.pi))
        counts, occ, flags = kernels.disk_census(cfg.seed, cfg.n_paths, cfg.dt, cfg.horizon,
                                                 cfg.eps_layer, cfg.cap_steps, cfg.noise, cfg.delta_min,
                                                 cells, ZIG_KI, ZIG_WI, ZIG_FI)
    else:
        raise EstimatorInvalidError(
            f"stationary excursion census needs finite m(G); not available for {geom.kind}")
    diag = _check_flags(flags)
    diag["runtime_s"] = time.perf_counter() - t0
    return CensusRun(geom, cfg, counts, occ, cells, diag)


def _prepare_pair(geom: Geometry, f, g, cfg: PathConfig):
    f = simplify(as_boundary_function(f))
    g = simplify(as_boundary_function(g))
    if geom.kind == "interval":
        fv = np.array([f(0.0), f(1.0)], dtype=float)
        gv = np.array([g(0.0), g(1.0)], dtype=float)
        if np.any((fv != 0) & (gv != 0)):
            raise EstimatorInvalidError("supports of f and g overlap")
        return None, fv, gv
    if geom.kind == "disk":
        bps = circle_partition(f, g)
        fv = cell_values_circle(f, bps)
        gv = cell_values_circle(g, bps)
        for a in _support_arcs(f, bps, fv):
            for b in _support_arcs(g, bps, gv):
                if arc_gap(a, b) < cfg.delta_min:
                    raise EstimatorInvalidError(
                        "supports of f and g are closer than delta_min; the census drops such excursions")
        return bps, fv, gv
    raise EstimatorInvalidError(
        f"Feller measure census needs a finite volume measure; {geom.kind} has m(G) = infinity")


def estimate_feller_measure(geom: Geometry, f, g, cfg: PathConfig, t: float | None = None) -> MCEstimate:
    """U(f x g) = m(G) E^{m/m(G)}[sum over excursions started in (0, t) of f(start) g(end)] / t."""
    if t is not None and abs(t - cfg.horizon) > 1e-15:
        cfg = cfg.replace(horizon=float(t))
    bps, fv, gv = _prepare_pair(geom, f, g, cfg)
    if not np.any(fv) or not np.any(gv):
        return MCEstimate(0.0, 0.0, cfg.n_paths, {"note": "f or g vanishes; census not run"})
    run = run_census(geom, cfg, bps)
    per_path = np.einsum("pij,i,j->p", run.counts[:, :, :-1].astype(float), fv, gv)
    scale = geom.volume_mass / cfg.horizon
    mean, se = _mean_se(per_path)
    diag = dict(run.diagnostics)
    diag.update({"dt": cfg.dt, "horizon": cfg.horizon, "eps_layer": cfg.eps_layer,
                 "records_counted": float(per_path.sum()), "killed": run.killed})
    return MCEstimate(scale * mean, scale * se, cfg.n_paths, diag)


def escape_census(geom: Geometry, cfg: PathConfig) -> int:
    """Number of excursions ending in the cemetery over a stationary census run."""
    return run_census(geom, cfg).killed


# ---------------------------------------------------------------------------
# local-time calibration and jump rates

def calibrate_local_time(cfg: PathConfig) -> MCEstimate:
    """kappa_LT forcing the interval jump rate per unit local time to U({0} x {1}) = 1/2."""
    run = run_census(Geometry.interval(), cfg)
    jumps = run.counts[:, 0, 1] + run.counts[:, 1, 0]
    raw = run.local_time(kappa=1.0).sum(axis=1)
    r, se = ratio_estimate(jumps, raw)
    return MCEstimate(r / 0.5, se / 0.5, cfg.n_paths, dict(run.diagnostics))


def circle_jump_rates(cfg: PathConfig, cells, bins, kappa: float = KAPPA_LT):
    """Jump rates of the time-changed circle process over arc-cell pairs.

    ``cells`` are sorted arc breakpoints and ``bins`` a list of (i, j) cell
    index pairs.  Rates are mu(F) * jumps / boundary time with ratio-estimator
    standard errors; under the stationary start they estimate U(A_i x A_j).
    Also returns the number of jumps to the cemetery.
    """
    geom = Geometry.disk()
    run = run_census(geom, cfg, cells)
    phi = run.local_time(kappa).sum(axis=1)
    out = []
    for i, j in bins:
        r, se = ratio_estimate(run.counts[:, i, j], phi)
        out.append(MCEstimate(geom.boundary_mass * r, geom.boundary_mass * se, cfg.n_paths,
                              {"jumps": int(run.counts[:, i, j].sum())}))
    return out, run


# ---------------------------------------------------------------------------
# escape (supplementary Feller) measure on the exterior of a sphere in R^3

def shell_qm_mass(R: float, r_cut: float) -> float:
    """Integral of q = 1 - R/|x| over R < |x| <= r_cut in R^3."""
    return 4.0 * math.pi * ((r_cut ** 3 - R ** 3) / 3.0 - R * (r_cut ** 2 - R ** 2) / 2.0)


def escape_tail(R: float, r_cut: float, t: float) -> float:
    """(1/t) int_{|x| > r_cut} q(x) P^x(T <= t) dx, the part of V(1) the shell misses."""
    s = math.sqrt(2.0 * t)
    b = (r_cut - R) / s
    inner = (0.25 - 0.5 * b * b) * erfc(b) + b * math.exp(-b * b) / (2.0 * math.sqrt(math.pi))
    return 4.0 * math.pi * R / t * s * s * inner


@dataclass
class EscapeRun:
    hit_cell: np.ndarray
    zb: np.ndarray
    shell_mass: float
    tail: float
    t: float
    R: float
    diagnostics: dict

    def per_path(self, f) -> np.ndarray:
        vals = cell_values_zonal(simplify(as_boundary_function(f)), self.zb)
        out = np.zeros(self.hit_cell.size)
        hit = self.hit_cell >= 0
        out[hit] = vals[self.hit_cell[hit]]
        return out

    def estimate(self, f) -> MCEstimate:
        f = simplify(as_boundary_function(f))
        v = self.per_path(f)
        mean, se = _mean_se(v)
        sphere_area = 4.0 * math.pi * self.R ** 2
        tail_part = self.tail * f.integrate(Geometry.ball_exterior(3, self.R)) / sphere_area
        value = self.shell_mass / self.t * mean + tail_part
        return MCEstimate(value, self.shell_mass / self.t * se, v.size,
                          {"tail_correction": tail_part, **self.diagnostics})


def run_escape(geom: Geometry, fs, cfg: PathConfig, t: float, shell_c: float = 4.0) -> EscapeRun:
    if geom.kind != "ball_exterior":
        raise EstimatorInvalidError(
            f"{geom.kind} has finite volume: the escape measure vanishes identically, nothing to estimate")
    if geom.d != 3:
        raise UnsupportedDataError("escape estimation implemented for d = 3")
    if not t > 0 or t < 100 * cfg.dt * (1 - 1e-12):
        raise SpecValidationError("census window must be at least 100 dt")
    R = geom.R
    r_cut = R + shell_c * math.sqrt(2.0 * t)
    r_esc = cfg.r_escape if cfg.r_escape is not None else R + 12.0 * math.sqrt(2.0 * t)
    if r_esc <= r_cut:
        raise SpecValidationError("r_escape must exceed the sampling shell radius")
    zb = zonal_partition(*[simplify(as_boundary_function(f)) for f in fs])
    t0 = time.perf_counter()
    hit_cell, _ = kernels.exterior_window(cfg.seed, cfg.n_paths, cfg.dt, t, R, r_cut, r_esc, zb,
                                          cfg.noise, ZIG_KI, ZIG_WI, ZIG_FI)
    diag = {"runtime_s": time.perf_counter() - t0, "r_cut": r_cut, "r_escape": r_esc,
            "hit_fraction": float(np.mean(hit_cell >= 0)), "dt": cfg.dt, "window": t}
    return EscapeRun(hit_cell, zb, shell_qm_mass(R, r_cut), escape_tail(R, r_cut, t), t, R, diag)


def estimate_escape_measure(geom: Geometry, f, cfg: PathConfig, t: float | None = None,
                            tail_fraction: float = 0.01) -> MCEstimate:
    """V(f) = (1/t) int q(x) E^x[f(X_T); T <= t] m(dx), sampled over a shell plus an exact tail."""
    t = cfg.horizon if t is None else t
    f = simplify(as_boundary_function(f))
    run = run_escape(geom, [f], cfg, t)
    if isinstance(f, Constant) and f.c == 0:
        return MCEstimate(0.0, 0.0, cfg.n_paths, {"note": "f vanishes"})
    est = run.estimate(f)
    tail_bound = run.tail * float(np.max(np.abs(cell_values_zonal(f, run.zb)))) * 4 * math.pi * geom.R ** 2 \
        / (4 * math.pi * geom.R ** 2)
    if tail_bound > tail_fraction * abs(est.value) and est.value != 0:
        raise TruncationDominatedError(f"tail bound {tail_bound:.3e} exceeds {tail_fraction} of the estimate")
    est.diagnostics["tail_bound"] = tail_bound
    return est


def escape_ratio(run: EscapeRun, f_num, f_den) -> MCEstimate:
    """V(f_num) / V(f_den) from one set of paths, with a paired delta-method error."""
    a = run.per_path(f_num)
    b = run.per_path(f_den)
    r, se = ratio_estimate(a, b)
    return MCEstimate(r, se, a.size, {})


def escape_consistency(cfg: PathConfig, R: float = 1.0, r0: float = 2.0, r_escape: float = 4.0,
                       max_time: float = 200.0) -> MCEstimate:
    """Fraction of paths from |x| = r0 that ever hit the sphere (target R / r0 in d = 3)."""
    out = kernels.exterior_ever_hit(cfg.seed, cfg.n_paths, cfg.dt, R, r0, r_escape,
                                    int(max_time / cfg.dt), cfg.noise, ZIG_KI, ZIG_WI, ZIG_FI)
    resolved = out >= 0
    v = (out[resolved] == 1).astype(float)
    mean, se = _mean_se(v)
    return MCEstimate(mean, se, int(resolved.sum()), {"unresolved": int((~resolved).sum())})


# ---------------------------------------------------------------------------
# time-step refinement on the interval

@dataclass
class RefinementResult:
    dts: np.ndarray
    estimates: list
    increments: list          # paired estimate differences between consecutive levels
    diagnostics: dict


def refinement_study(cfg: PathConfig, dts=(4e-5, 1e-5, 2.5e-6)) -> RefinementResult:
    """Coupled interval estimates of U({0} x {1}) at several step sizes.

    All levels share the Brownian increments of the finest level, so the
    differences between levels are estimated with little noise.
    """
    dts = np.asarray(dts, dtype=float)
    fine = dts.min()
    ratios = np.rint(dts / fine).astype(np.int64)
    if np.any(np.abs(ratios * fine - dts) > 1e-9 * dts):
        raise SpecValidationError("step sizes must be integer multiples of the finest one")
    t0 = time.perf_counter()
    counts, flags = kernels.interval_coupled(cfg.seed, cfg.n_paths, fine, ratios, cfg.horizon, cfg.eps_c,
                                             int(round(cfg.cap_time / dts.max())), ZIG_KI, ZIG_WI, ZIG_FI)
    if np.any(flags & kernels.FLAG_UNSTABLE):
        raise InstabilityError("unstable step in refinement study")
    per = 0.5 * (counts[:, :, 0] + counts[:, :, 1]).astype(float) / cfg.horizon
    ests = [MCEstimate(*_mean_se(per[:, l]), cfg.n_paths, {"dt": float(dts[l])}) for l in range(dts.size)]
    incs = [MCEstimate(*_mean_se(per[:, l + 1] - per[:, l]), cfg.n_paths,
                       {"from_dt": float(dts[l]), "to_dt": float(dts[l + 1])}) for l in range(dts.size - 1)]
    diag = {"runtime_s": time.perf_counter() - t0,
            "unresolved_paths": int(np.count_nonzero(flags & kernels.FLAG_UNRESOLVED))}
    return RefinementResult(dts, ests, incs, diag)
