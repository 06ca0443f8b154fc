"""Single recorded paths: simulation, excursion records, local time and time change."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..boundary import as_boundary_function
from ..errors import InstabilityError, UnsupportedDataError
from ..geometry import Geometry
from . import kernels
from .config import PathConfig
from .rng import ZIG_FI, ZIG_KI, ZIG_WI

DELTA = None  # end point of an excursion that never returns


@dataclass
class DiscretePath:
    """A sampled path.

    ``contacts`` holds, per sample, the boundary point touched during the step
    ending there: endpoint 0./1. (interval), an angle (circle), a point of the
    sphere (exterior), or NaN for no contact.
    """
    geometry: Geometry
    times: np.ndarray
    positions: np.ndarray
    contacts: np.ndarray
    horizon: float
    dt: float
    escaped: bool = False
    path_id: int = 0

    @property
    def n_horizon(self) -> int:
        """Index of the last sample inside the census window."""
        return int(np.searchsorted(self.times, self.horizon * (1 + 1e-12), side="right")) - 1

    def has_contact(self) -> np.ndarray:
        c = self.contacts
        return ~np.isnan(c) if c.ndim == 1 else ~np.isnan(c[:, 0])

    @classmethod
    def from_positions(cls, geometry: Geometry, times, positions, horizon=None, tol=1e-12,
                       path_id: int = 0) -> "DiscretePath":
        """Build a path from given samples; samples lying on F count as contacts."""
        times = np.asarray(times, dtype=float)
        pos = np.asarray(positions, dtype=float)
        if geometry.kind == "interval":
            contacts = np.where(pos <= tol, 0.0, np.where(pos >= 1.0 - tol, 1.0, np.nan))
        elif geometry.boundary == "circle":
            r = np.linalg.norm(pos, axis=1)
            contacts = np.where(np.abs(r - 1.0) <= tol, np.mod(np.arctan2(pos[:, 1], pos[:, 0]), 2 * np.pi),
                                np.nan)
        else:
            r = np.linalg.norm(pos, axis=1)
            on = np.abs(r - geometry.R) <= tol * geometry.R
            contacts = np.full(pos.shape, np.nan)
            contacts[on] = pos[on] * (geometry.R / r[on])[:, None]
        contacts[0] = np.nan if contacts.ndim == 1 else contacts[0]
        dt = float(np.min(np.diff(times))) if times.size > 1 else 1.0
        return cls(geometry, times, pos, contacts, times[-1] if horizon is None else horizon, dt,
                   False, path_id)


def simulate_reflected_path(geom: Geometry, x0, cfg: PathConfig, path_index: int = 0) -> DiscretePath:
    """Euler scheme reflected at F (interval, disk) or with the escape protocol (exterior).

    ``x0=None`` draws the starting point from the normalized volume measure
    (q m on a shell for the exterior) using the path's own stream, which makes
    the recorded path identical to path ``path_index`` of the fused censuses.
    The path is continued past the horizon until its next boundary contact.
    """
    if geom.kind == "interval":
        x = -1.0 if x0 is None else float(x0)
        if x0 is not None and not 0.0 <= x <= 1.0:
            raise ValueError("x0 must lie in [0, 1]")
        pos, contact, bad = kernels.interval_record(cfg.seed, path_index, x, cfg.dt, cfg.horizon,
                                                    cfg.cap_steps, cfg.noise, ZIG_KI, ZIG_WI, ZIG_FI)
        contacts = np.where(contact >= 0, contact.astype(float), np.nan)
        times = cfg.dt * np.arange(pos.size)
        escaped = False
    elif geom.kind == "disk":
        if x0 is None:
            a, b = math.nan, math.nan
        else:
            a, b = (float(v) for v in x0)
            if a * a + b * b > 1.0:
                raise ValueError("x0 must lie in the closed disk")
        pos, contacts, bad = kernels.disk_record(cfg.seed, path_index, a, b, cfg.dt, cfg.horizon,
                                                 cfg.cap_steps, cfg.noise, ZIG_KI, ZIG_WI, ZIG_FI)
        times = cfg.dt * np.arange(pos.shape[0])
        escaped = False
    elif geom.kind == "ball_exterior":
        if geom.d != 3:
            raise UnsupportedDataError("exterior simulation implemented for d = 3")
        r_esc = cfg.check_escape_radius(geom.R)
        r_cut = min(r_esc, geom.R + 4.0 * math.sqrt(2.0 * cfg.horizon))
        if x0 is None:
            a = b = c = math.nan
        else:
            a, b, c = (float(v) for v in x0)
            r = math.sqrt(a * a + b * b + c * c)
            if not geom.R <= r <= r_esc:
                raise ValueError("x0 must lie in the shell R <= |x| <= r_escape")
        times, pos, flag, escaped = kernels.exterior_record(
            cfg.seed, path_index, a, b, c, cfg.dt, cfg.horizon, geom.R, r_cut, r_esc, cfg.noise,
            ZIG_KI, ZIG_WI, ZIG_FI)
        r = np.linalg.norm(pos, axis=1)
        contacts = np.full(pos.shape, np.nan)
        contacts[flag] = pos[flag] * (geom.R / r[flag])[:, None]
        bad = False
    else:
        raise UnsupportedDataError(f"path simulation not available for {geom.kind}")
    if bad:
        raise InstabilityError("a step left the domain by more than 10 sqrt(dt)")
    return DiscretePath(geom, times, pos, contacts, cfg.horizon, cfg.dt, bool(escaped), path_index)


# ---------------------------------------------------------------------------
# excursions

@dataclass
class ExcursionRecord:
    path_id: int
    s_start: float
    s_end: float
    start_point: object
    end_point: object          # DELTA (None) for escapes
    start_index: int
    end_index: int

    @property
    def escaped(self) -> bool:
        return self.end_point is None


def _distance_to_F(geom: Geometry, pos: np.ndarray) -> np.ndarray:
    if geom.kind == "interval":
        return np.minimum(pos, 1.0 - pos)
    r = np.linalg.norm(pos, axis=1)
    return np.abs(r - geom.R)


def boundary_separation(geom: Geometry, a, b) -> float:
    """Intrinsic distance between boundary points (arc on the circle, chord on the sphere)."""
    if geom.kind == "interval":
        return abs(float(a) - float(b))
    if geom.boundary == "circle":
        d = abs(float(a) - float(b)) % (2 * math.pi)
        return min(d, 2 * math.pi - d)
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))


def _point(contacts, i):
    c = contacts[i]
    return float(c) if np.ndim(c) == 0 else np.array(c)


def decompose_excursions(path: DiscretePath, cfg: PathConfig) -> list[ExcursionRecord]:
    """Excursion records between consecutive boundary contacts.

    A record is kept when the path spent at least two steps outside the
    boundary layer and its end points are at least ``delta_min`` apart, or
    when it ends in the cemetery.  Only records starting before the horizon
    are returned.
    """
    geom = path.geometry
    outside = _distance_to_F(geom, path.positions) > cfg.eps_layer
    has = path.has_contact()
    n_h = path.n_horizon
    records = []
    last = -1
    out = 0
    for i in range(1, path.times.size):
        if outside[i]:
            out += 1
        if has[i]:
            if last >= 0 and last < n_h and out >= kernels.MIN_OUTSIDE:
                a, b = _point(path.contacts, last), _point(path.contacts, i)
                if boundary_separation(geom, a, b) >= cfg.delta_min and boundary_separation(geom, a, b) > 0:
                    records.append(ExcursionRecord(path.path_id, float(path.times[last]), float(path.times[i]),
                                                   a, b, last, i))
            last = i
            out = 0
    if path.escaped and last >= 0 and last < n_h:
        end = path.times.size - 1
        records.append(ExcursionRecord(path.path_id, float(path.times[last]), float(path.times[end]),
                                       _point(path.contacts, last), DELTA, last, end))
    return records


# ---------------------------------------------------------------------------
# local time and time change

def layer_normalization(geom: Geometry, eps: float) -> float:
    """mu(F) / m(layer of width eps inside G): turns layer occupation into local time."""
    if geom.kind == "interval":
        return 1.0 / eps
    if geom.kind == "disk":
        return 1.0 / (eps * (1.0 - 0.5 * eps))
    if geom.kind == "ball_exterior" and geom.d == 3:
        R = geom.R
        return 3.0 * R * R / ((R + eps) ** 3 - R ** 3)
    raise UnsupportedDataError(f"no layer normalization for {geom.kind}")


@dataclass
class LocalTimeClock:
    times: np.ndarray
    phi: np.ndarray
    kappa: float

    def at(self, t):
        idx = np.searchsorted(self.times, t, side="right") - 1
        return self.phi[np.clip(idx, 0, None)]

    def tau(self, b):
        """Right-continuous inverse inf{s : phi(s) > b}; +inf beyond the recorded range."""
        b = np.asarray(b, dtype=float)
        idx = np.searchsorted(self.phi, b, side="right")
        out = np.where(idx < self.times.size, self.times[np.minimum(idx, self.times.size - 1)], np.inf)
        return float(out) if out.ndim == 0 else out

    def tau_index(self, b):
        return np.searchsorted(self.phi, b, side="right")

    @property
    def total(self) -> float:
        return float(self.phi[-1])


def build_local_time(path: DiscretePath, cfg: PathConfig, kappa: float | None = None) -> LocalTimeClock:
    """phi(t) = kappa * (mu(F) / m(layer)) * time spent in the layer, counted up to the horizon."""
    from .census import KAPPA_LT
    geom = path.geometry
    if not geom.recurrent and geom.kind != "ball_exterior":
        raise UnsupportedDataError("local time needs a model geometry")
    kappa = KAPPA_LT if kappa is None else kappa
    inlayer = _distance_to_F(geom, path.positions) < cfg.eps_layer
    if geom.kind == "disk":
        inlayer = np.linalg.norm(path.positions, axis=1) > 1.0 - cfg.eps_layer
    inlayer[0] = False
    inlayer[path.n_horizon + 1:] = False
    dts = np.diff(path.times, prepend=path.times[0])
    inc = np.where(inlayer, dts, 0.0) * kappa * layer_normalization(geom, cfg.eps_layer)
    return LocalTimeClock(path.times, np.cumsum(inc), kappa)


def snap_to_boundary(geom: Geometry, pos):
    if geom.kind == "interval":
        return np.where(np.asarray(pos) < 0.5, 0.0, 1.0)
    pos = np.asarray(pos, dtype=float)
    r = np.linalg.norm(pos, axis=-1, keepdims=True)
    if geom.boundary == "circle":
        return np.mod(np.arctan2(pos[..., 1], pos[..., 0]), 2 * math.pi)
    return pos * (geom.R / r)


@dataclass
class Jump:
    boundary_time: float
    from_point: object
    to_point: object
    size: float
    record: ExcursionRecord = field(repr=False, default=None)


@dataclass
class TimeChangedPath:
    geometry: Geometry
    grid_times: np.ndarray
    positions: np.ndarray
    jumps: list
    total_time: float
    path_id: int = 0


def time_change(path: DiscretePath, clock: LocalTimeClock, cfg: PathConfig,
                grid_step: float | None = None, records=None) -> TimeChangedPath:
    """Y_t = X_{tau_t} on a boundary-time grid, plus one jump per registered excursion.

    The jump of an excursion starting at clock time s sits at boundary time
    phi(s), going from its start point to its end point.
    """
    geom = path.geometry
    total = clock.at(path.horizon)
    if grid_step is None:
        grid_step = total / 1000 if total > 0 else 1.0
    grid = np.arange(0.0, total, grid_step) if total > 0 else np.empty(0)
    idx = clock.tau_index(grid)
    idx = np.minimum(idx, path.times.size - 1)
    ypos = snap_to_boundary(geom, path.positions[idx]) if grid.size else np.empty(0)
    if records is None:
        records = decompose_excursions(path, cfg)
    jumps = []
    for rec in records:
        if rec.escaped:
            continue
        jumps.append(Jump(float(clock.phi[rec.start_index]), rec.start_point, rec.end_point,
                          boundary_separation(geom, rec.start_point, rec.end_point), rec))
    return TimeChangedPath(geom, grid, ypos, jumps, float(total), path.path_id)


@dataclass
class JumpCensusResult:
    bins: list
    counts: np.ndarray           # per path, per bin
    boundary_time: np.ndarray    # per path
    rates: np.ndarray
    se: np.ndarray
    boundary_mass: float

    def ci(self, z: float = 1.96):
        return self.rates - z * self.se, self.rates + z * self.se


def ratio_estimate(num: np.ndarray, den: np.ndarray) -> tuple[float, float]:
    """sum(num) / sum(den) with a delta-method standard error over independent paths."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    n = num.size
    r = num.sum() / den.sum()
    if n < 2:
        return r, math.sqrt(max(num.sum(), 1.0)) / den.sum()
    resid = num - r * den
    se = math.sqrt(np.sum(resid ** 2) / (n * (n - 1))) / den.mean()
    return float(r), float(se)


def jump_census(ys, bins) -> JumpCensusResult:
    """Empirical jump rates of time-changed paths over bins (f, g) of boundary functions.

    The rate for (f, g) is mu(F) * sum_jumps f(from) g(to) / total boundary
    time; under the stationary start it estimates U(f x g).
    """
    if isinstance(ys, TimeChangedPath):
        ys = [ys]
    if not ys:
        raise ValueError("no paths")
    geom = ys[0].geometry
    pairs = [(as_boundary_function(f), as_boundary_function(g)) for f, g in bins]
    counts = np.zeros((len(ys), len(pairs)))
    times = np.array([y.total_time for y in ys])
    for p, y in enumerate(ys):
        if not y.jumps:
            continue
        a = np.array([j.from_point for j in y.jumps])
        b = np.array([j.to_point for j in y.jumps])
        for k, (f, g) in enumerate(pairs):
            counts[p, k] = float(np.sum(f(a) * g(b)))
    mass = geom.boundary_mass
    rates = np.zeros(len(pairs))
    se = np.zeros(len(pairs))
    if times.sum() > 0:
        for k in range(len(pairs)):
            r, s = ratio_estimate(counts[:, k], times)
            rates[k], se[k] = mass * r, mass * s
    return JumpCensusResult(list(bins), counts, times, rates, se, mass)
