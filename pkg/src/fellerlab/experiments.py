"""Built-in experiment catalog.

Each experiment binds numerical routes to one identity and turns the outcome
into a list of checks.  Runners take the merged parameter dict, the seed and
the output directory, and return an ``Outcome``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .boundary import Arcs, Band, Constant, Endpoints, Fourier, Zonal
from .energy import dirichlet_energy, douglas_integral, energy_identity_residual, energy_vs_douglas
from .errors import SpecValidationError
from .geometry import Geometry, arc_pair_feller, escape_probability, poisson_kernel_ball, sphere_area
from .quadrature import _orthonormal_frame
from .spectral import alpha_feller_closed_form_interval, escape_constant_exact, feller_measure_limit

Z95 = 1.959963984540054

ROUTES = ("spectral", "quadrature", "montecarlo", "cross-check")
POLICIES = ("absolute", "relative", "CI-overlap")

# which geometry kinds each operation accepts
COMPATIBILITY = {
    "feller_census": {"interval", "disk"},
    "escape_census": {"ball_exterior"},
    "jump_census": {"disk"},
    "douglas": {"interval", "disk", "ball_interior"},
}


@dataclass
class Check:
    name: str
    value: float
    target: float
    provenance: str
    policy: str
    tolerance: float | None = None
    ci: tuple | None = None
    passed: bool = False

    @property
    def gap(self) -> float:
        return abs(self.value - self.target)

    def as_dict(self) -> dict:
        d = {"name": self.name, "value": self.value, "target": self.target,
             "provenance": self.provenance, "policy": self.policy, "gap": self.gap,
             "tolerance": self.tolerance, "passed": self.passed}
        if self.ci is not None:
            d["ci"] = list(self.ci)
        return d


def absolute(name, value, target, tol, provenance) -> Check:
    value, target = float(value), float(target)
    return Check(name, value, target, provenance, "absolute", tol, passed=bool(abs(value - target) <= tol))


def relative(name, value, target, tol, provenance) -> Check:
    value, target = float(value), float(target)
    ok = abs(value - target) <= tol * abs(target)
    return Check(name, value, target, provenance, "relative", tol, passed=bool(ok))


def covers(name, est, target, provenance, z: float = Z95) -> Check:
    lo, hi = est.value - z * est.se, est.value + z * est.se
    return Check(name, float(est.value), float(target), provenance, "CI-overlap", z,
                 ci=(lo, hi), passed=bool(lo <= target <= hi))


def flag(name, ok: bool, value=1.0, target=1.0, provenance="construction", policy="absolute") -> Check:
    return Check(name, float(value), float(target), provenance, policy, 0.0, passed=bool(ok))


@dataclass
class Outcome:
    checks: list
    values: dict = field(default_factory=dict)
    plots: dict = field(default_factory=dict)      # series name -> (columns, rows)
    artifacts: list = field(default_factory=list)


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    geometry: str          # circle, interval, sphere
    route: str
    policy: str
    ref: str
    defaults: dict
    runner: Callable
    acceptance: int | None = None

    def __post_init__(self):
        if self.route not in ROUTES:
            raise SpecValidationError(f"unknown route {self.route}")
        if self.policy not in POLICIES:
            raise SpecValidationError(f"unknown tolerance policy {self.policy}")
        if not self.ref:
            raise SpecValidationError("every experiment names the identity it tests")


def _cfg(params: dict, seed: int):
    from .mc.config import PathConfig
    keys = ("dt", "horizon", "eps_c", "n_paths", "delta_min", "cap_time", "r_escape")
    kw = {k: params[k] for k in keys if k in params}
    if "n_paths" in kw:
        kw["n_paths"] = int(kw["n_paths"])
    return PathConfig(seed=int(seed), **kw)


def _ints(s) -> list[int]:
    if isinstance(s, (list, tuple)):
        return [int(v) for v in s]
    return [int(v) for v in str(s).split(",") if v.strip()]


def _floats(s) -> list[float]:
    if isinstance(s, (list, tuple)):
        return [float(v) for v in s]
    return [float(v) for v in str(s).split(",") if v.strip()]


# ---------------------------------------------------------------------------
# deterministic experiments

def run_douglas_disk(p, seed, out) -> Outcome:
    disk = Geometry.disk()
    checks, values, rows = [], {}, []
    for n in _ints(p["modes"]):
        f = Fourier.cos(n)
        rep = energy_vs_douglas(disk, f, rtol=p["rtol"])
        target = n * math.pi / 2
        checks.append(relative(f"dirichlet_energy cos {n}", rep.dirichlet_energy, target, p["rtol"],
                               "DERIVED: Fourier-mode energy n pi / 2"))
        checks.append(relative(f"douglas_integral cos {n}", rep.douglas_value, target, p["rtol"],
                               "DERIVED: Fourier-mode energy n pi / 2"))
        checks.append(relative(f"energy vs douglas cos {n}", rep.douglas_value, rep.dirichlet_energy,
                               p["rtol"], "identity: energy equals Douglas integral"))
        values[f"n{n}"] = {"dirichlet_energy": rep.dirichlet_energy, "douglas": rep.douglas_value,
                           "rel_gap": rep.rel_gap}
        rows.append((n, rep.douglas_value, rep.dirichlet_energy, target))
    return Outcome(checks, values, {"energy_by_mode": (["n", "douglas", "dirichlet", "exact"], rows)})


def run_interval_spectral(p, seed, out) -> Outcome:
    iv = Geometry.interval()
    alphas = [2.0 ** k for k in range(int(p["k_max"]) + 1)] + [float(p["alpha_final"])]
    alphas = sorted(set(alphas))
    lim = feller_measure_limit(iv, Endpoints.indicator(0), Endpoints.indicator(1), alphas)
    cf = alpha_feller_closed_form_interval(float(p["alpha_final"]))["01"]
    checks = [
        absolute("U_alpha(0,1) at final alpha vs 1/2", lim.value, 0.5, p["tol"],
                 "DERIVED: closed form 1/2 - beta / (2 sinh beta) tends to 1/2"),
        absolute("quadrature vs closed form at final alpha", lim.value, cf, 1e-10,
                 "DERIVED: closed form 1/2 - beta / (2 sinh beta)"),
    ]
    rows = list(zip(lim.alphas.tolist(), lim.iterates.tolist()))
    return Outcome(checks, {"final": lim.value, "extrapolated": lim.extrapolated,
                            "max_violation": lim.max_violation},
                   {"u_alpha": (["alpha", "u_alpha"], rows)})


def run_interval_trace(p, seed, out) -> Outcome:
    iv = Geometry.interval()
    u = Endpoints(0.0, 1.0)
    rep = energy_vs_douglas(iv, u, rtol=p["rtol"])
    checks = [
        relative("energy of harmonic extension vs Douglas form", rep.douglas_value, rep.dirichlet_energy,
                 p["rtol"], "identity: energy equals Douglas integral"),
        relative("Douglas form = U(0,1)", rep.douglas_value, 0.5, p["rtol"],
                 "DERIVED: U(0,1) = 1/2 from the spectral limit"),
    ]
    return Outcome(checks, {"dirichlet_energy": rep.dirichlet_energy, "douglas": rep.douglas_value})


def run_interval_monotone(p, seed, out) -> Outcome:
    iv = Geometry.interval()
    alphas = [2.0 ** k for k in range(int(p["k_max"]) + 1)]
    lim = feller_measure_limit(iv, Endpoints.indicator(0), Endpoints.indicator(1), alphas, tol=math.inf)
    checks = [absolute("largest decrease along the schedule", lim.max_violation, 0.0, p["tol"],
                       "identity: U_alpha nondecreasing in alpha")]
    cf = np.array([alpha_feller_closed_form_interval(a)["01"] for a in alphas])
    checks.append(absolute("largest deviation from closed form", float(np.max(np.abs(cf - lim.iterates))),
                           0.0, 1e-10, "DERIVED: closed form 1/2 - beta / (2 sinh beta)"))
    rows = list(zip(alphas, lim.iterates.tolist()))
    return Outcome(checks, {"iterates": lim.iterates.tolist()}, {"u_alpha": (["alpha", "u_alpha"], rows)})


def run_energy_identity(p, seed, out) -> Outcome:
    iv = Geometry.interval()
    checks = []
    for a in _floats(p["alphas"]):
        r = energy_identity_residual(iv, a, Endpoints(0.0, 1.0), panels=int(p["panels"]), nodes=int(p["nodes"]))
        checks.append(absolute(f"residual at alpha = {a:g}", r, 0.0, p["tol"],
                               "DERIVED: closed-form both sides"))
    return Outcome(checks, {c.name: c.value for c in checks})


def _poisson_mass(d, R, x) -> float:
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    frame = _orthonormal_frame(x / r)
    u, v = frame[0], frame[1]

    def profile(t):
        t = np.asarray(t, dtype=float)
        eta = R * (t[..., None] * u + np.sqrt(np.clip(1 - t * t, 0, None))[..., None] * v)
        return poisson_kernel_ball(d, R, x, eta)
    return Zonal(profile, pole=x).integrate(Geometry.ball_interior(d, R))


def run_poisson_mass(p, seed, out) -> Outcome:
    rng = np.random.default_rng(int(seed))
    checks, rows = [], []
    dims = _ints(p["dims"])
    for k in range(int(p["n_points"])):
        d = dims[k % len(dims)]
        R = float(rng.uniform(0.5, 2.0))
        direction = rng.normal(size=d)
        direction /= np.linalg.norm(direction)
        inside = k % 2 == 0
        r = R * (rng.uniform(0.0, 0.95) if inside else rng.uniform(1.05, 4.0))
        x = r * direction
        mass = _poisson_mass(d, R, x)
        target = 1.0 if inside else 1.0 - escape_probability(Geometry.ball_exterior(d, R), x)
        prov = "TRIVIAL: hitting is certain from inside" if inside \
            else "PAPER: exterior hitting probability (R/|x|)^(d-2)"
        checks.append(absolute(f"d={d} R={R:.3f} |x|={r:.3f}", mass, target, p["tol"], prov))
        rows.append((r / R, mass, target))
    return Outcome(checks, {}, {"poisson_mass": (["r_over_R", "mass", "target"], rows)})


def run_ball_douglas(p, seed, out) -> Outcome:
    checks = []
    for d in _ints(p["dims"]):
        g = Geometry.ball_interior(d, 1.0)
        f = Zonal(lambda t: np.asarray(t) ** 2, pole=np.eye(d)[-1], peaked=False)
        e = dirichlet_energy(g, f)
        dv = douglas_integral(g, f)
        checks.append(relative(f"d={d} energy vs Douglas for t^2", dv, e, p["rtol"],
                               "identity: energy equals Douglas integral"))
    return Outcome(checks, {})


def run_sphere_escape_constant(p, seed, out) -> Outcome:
    from .spectral import supplementary_feller
    R = float(p["R"])
    g = Geometry.ball_exterior(3, R)
    v0 = escape_constant_exact(g)
    alpha = float(p["alpha"])
    v1 = supplementary_feller(g, alpha, Constant(1.0))
    checks = [relative("V_alpha(1) vs v0 * area", v1, v0 * 4 * math.pi * R * R, p["rtol"],
                       "DERIVED: constant escape density 1/(2R)")]
    return Outcome(checks, {"v0": v0, "V_alpha(1)": v1})


# ---------------------------------------------------------------------------
# Monte Carlo experiments

def _record_sample(geom, cfg, n_record, out: Path, name, seed, jumps=False):
    """Record a few full paths and write their excursions (and jumps) as CSV."""
    from .mc.io import write_excursions, write_jumps
    from .mc.paths import build_local_time, decompose_excursions, simulate_reflected_path, time_change
    if n_record <= 0 or out is None:
        return []
    recs, ys = [], []
    for i in range(n_record):
        path = simulate_reflected_path(geom, None, cfg, path_index=i)
        r = decompose_excursions(path, cfg)
        recs.extend(r)
        if jumps:
            ys.append(time_change(path, build_local_time(path, cfg), cfg, records=r))
    files = [str(write_excursions(out / f"{name}-{seed}-excursions.csv", geom, recs))]
    if jumps:
        files.append(str(write_jumps(out / f"{name}-{seed}-jumps.csv", geom, ys)))
    return files


def run_interval_mc(p, seed, out) -> Outcome:
    from .mc.census import estimate_feller_measure
    iv = Geometry.interval()
    cfg = _cfg(p, seed)
    est = estimate_feller_measure(iv, Endpoints.indicator(0), Endpoints.indicator(1), cfg)
    checks = [covers("census U(0,1)", est, 0.5, "DERIVED: spectral limit 1/2"),
              absolute("CI half-width / target", est.half_width / 0.5, 0.0, p["max_rel_half_width"],
                       "criterion on precision")]
    arts = _record_sample(iv, cfg.replace(n_paths=1), int(p["record_paths"]), out, "interval-feller-mc", seed)
    return Outcome(checks, {"estimate": est.as_dict()}, artifacts=arts)


def _arc(s):
    a, b = _floats(s)
    return (a, b - a)


def run_circle_census(p, seed, out) -> Outcome:
    from .mc.census import estimate_feller_measure
    disk = Geometry.disk()
    A, B = _arc(p["arc_a"]), _arc(p["arc_b"])
    target = arc_pair_feller(A, B)
    cfg = _cfg(p, seed)
    fA = Arcs([(A[0], A[0] + A[1])])
    fB = Arcs([(B[0], B[0] + B[1])])
    est = estimate_feller_measure(disk, fA, fB, cfg)
    checks = [covers("census U(1_A x 1_B)", est, target, "DERIVED: closed-form arc-pair kernel integral"),
              absolute("CI half-width / target", est.half_width / target, 0.0, p["max_rel_half_width"],
                       "criterion on precision")]
    return Outcome(checks, {"estimate": est.as_dict(), "target": target})


def run_circle_jumps(p, seed, out) -> Outcome:
    from scipy.stats import norm

    from .mc.census import circle_jump_rates
    k = int(p["n_cells"])
    h = 2 * math.pi / k
    cells = np.arange(k) * h
    bins = [tuple(int(v) for v in b.split("-")) for b in str(p["bins"]).split(",")]
    cfg = _cfg(p, seed)
    ests, run = circle_jump_rates(cfg, cells, bins)
    z = float(norm.ppf(1 - 0.05 / (2 * len(bins))))
    checks, rows = [], []
    for (i, j), e in zip(bins, ests):
        tg = arc_pair_feller((i * h, h), (j * h, h))
        checks.append(covers(f"jump rate A{i} -> A{j}", e, tg, "DERIVED: closed-form arc-pair kernel integral",
                             z=z))
        rows.append((f"{i}-{j}", e.value, tg, e.value - z * e.se, e.value + z * e.se))
    checks.append(absolute("jumps to the cemetery", run.killed, 0.0, 0.0, "PAPER: no killing on bounded G"))
    arts = _record_sample(Geometry.disk(), cfg.replace(n_paths=1), int(p["record_paths"]), out,
                          "circle-jump-census", seed, jumps=True)
    return Outcome(checks, {"simultaneous_z": z, "rates": [e.as_dict() for e in ests]},
                   {"jump_rates": (["bin", "empirical", "analytic", "ci_lo", "ci_hi"], rows)}, arts)


def run_exterior_escape(p, seed, out) -> Outcome:
    from .mc.census import escape_census, escape_ratio, run_escape
    kind = p.get("geometry", "ball_exterior")
    if kind not in COMPATIBILITY["escape_census"]:
        raise SpecValidationError(f"escape estimation is not defined on {kind}")
    g = Geometry.ball_exterior(3, float(p["R"]))
    cfg = _cfg(p, seed)
    run = run_escape(g, [Constant(1.0), Band.hemisphere()], cfg, float(p["window"]))
    full = run.estimate(Constant(1.0))
    north = run.estimate(Band.hemisphere())
    ratio = escape_ratio(run, Band.hemisphere(), Constant(1.0))
    checks = [covers("V(north) / V(1)", ratio, 0.5, "PAPER: V is a constant multiple of surface measure")]
    small = cfg.replace(n_paths=int(p["zero_paths"]), horizon=1.0, dt=1e-3)
    for kind in ("interval", "disk"):
        geom = Geometry.interval() if kind == "interval" else Geometry.disk()
        killed = escape_census(geom, small)
        checks.append(absolute(f"{kind} escape census", killed, 0.0, 0.0, "PAPER: V = 0 on bounded G"))
    v_exact = escape_constant_exact(g) * 4 * math.pi * g.R ** 2
    return Outcome(checks, {"V(1)": full.as_dict(), "V(north)": north.as_dict(), "ratio": ratio.as_dict(),
                            "V(1) exact": v_exact})


def run_escape_consistency(p, seed, out) -> Outcome:
    from .mc.census import escape_consistency
    cfg = _cfg(p, seed)
    R, r0 = float(p["R"]), float(p["r0"])
    est = escape_consistency(cfg, R=R, r0=r0, r_escape=float(p["r_escape"]))
    target = 1 - escape_probability(Geometry.ball_exterior(3, R), np.array([0, 0, r0]))
    return Outcome([covers("hit fraction", est, target, "PAPER: hitting probability R/|x|")],
                   {"estimate": est.as_dict()})


def run_refinement(p, seed, out) -> Outcome:
    from .mc.census import refinement_study
    cfg = _cfg(p, seed).replace(dt=min(_floats(p["dts"])))
    res = refinement_study(cfg, dts=_floats(p["dts"]))
    checks = [covers(f"dt = {e.diagnostics['dt']:g}", e, 0.5, "DERIVED: spectral limit 1/2")
              for e in res.estimates]
    lo = max(e.ci[0] for e in res.estimates)
    hi = min(e.ci[1] for e in res.estimates)
    checks.append(flag("all CIs overlap", lo <= hi, value=hi - lo, target=0.0, policy="CI-overlap"))
    inc = res.increments
    signs = [math.copysign(1.0, d.value) for d in inc]
    bias_side = math.copysign(1.0, 0.5 - res.estimates[0].value)
    checks.append(flag("increments point toward 1/2", all(s == bias_side for s in signs)))
    checks.append(flag("increments shrink", all(abs(inc[i + 1].value) < abs(inc[i].value)
                                                 for i in range(len(inc) - 1))))
    rows = [(e.diagnostics["dt"], e.value, e.ci[0], e.ci[1]) for e in res.estimates]
    return Outcome(checks, {"estimates": [e.as_dict() for e in res.estimates],
                            "increments": [d.as_dict() for d in inc], **res.diagnostics},
                   {"refinement": (["dt", "estimate", "ci_lo", "ci_hi"], rows)})


# ---------------------------------------------------------------------------

_MC = {"eps_c": 5.0, "delta_min": 0.05, "cap_time": 10.0}

CATALOG = {s.name: s for s in [
    ExperimentSpec("douglas-disk", "circle", "cross-check", "relative",
                   "energy of the harmonic extension equals the Douglas integral on the circle for cos n theta",
                   {"modes": "1,2,3,4", "rtol": 1e-5}, run_douglas_disk, 1),
    ExperimentSpec("douglas-disk-n3", "circle", "cross-check", "relative",
                   "energy of the harmonic extension of cos 3 theta equals its Douglas integral, 3 pi / 2",
                   {"modes": "3", "rtol": 1e-5}, run_douglas_disk),
    ExperimentSpec("interval-feller-spectral", "interval", "spectral", "absolute",
                   "Feller measure between the endpoints as the large-alpha limit of alpha (H^alpha 1_0, H 1_1)",
                   {"k_max": 14, "alpha_final": 1e4, "tol": 1e-4}, run_interval_spectral, 2),
    ExperimentSpec("interval-trace-energy", "interval", "quadrature", "relative",
                   "trace form of the interval equals the energy of the linear harmonic extension",
                   {"rtol": 1e-12}, run_interval_trace, 2),
    ExperimentSpec("interval-feller-mc", "interval", "montecarlo", "CI-overlap",
                   "expected excursion census from 0 to 1 per unit time equals the Feller measure",
                   {"n_paths": 100000, "dt": 1e-5, "horizon": 1.0, "max_rel_half_width": 0.05,
                    "record_paths": 5, **_MC}, run_interval_mc, 2),
    ExperimentSpec("interval-monotone", "interval", "spectral", "absolute",
                   "U_alpha is nondecreasing in alpha along a doubling schedule",
                   {"k_max": 14, "tol": 1e-9}, run_interval_monotone, 3),
    ExperimentSpec("interval-energy-identity", "interval", "quadrature", "absolute",
                   "finite-alpha energy identity for endpoint data: interior energy terms equal "
                   "twice the jump-squared Feller term",
                   {"alphas": "1,2,8", "tol": 1e-8, "panels": 64, "nodes": 8}, run_energy_identity, 4),
    ExperimentSpec("circle-arc-census", "circle", "montecarlo", "CI-overlap",
                   "excursion census between two arcs per unit time equals the Feller measure of the arc pair",
                   {"n_paths": 100000, "dt": 2.5e-5, "horizon": 1.0, "arc_a": f"0,{math.pi / 2!r}",
                    "arc_b": f"{math.pi!r},{3 * math.pi / 2!r}", "max_rel_half_width": 0.05, **_MC},
                   run_circle_census, 5),
    ExperimentSpec("circle-jump-census", "circle", "montecarlo", "CI-overlap",
                   "jump rates of the time-changed boundary process equal the Feller kernel integrated "
                   "over arc pairs, with no killing",
                   {"n_paths": 100000, "dt": 2.5e-5, "horizon": 1.0, "n_cells": 8,
                    "bins": "0-4,4-0,1-5,2-6,3-7,0-2,2-0,1-4,5-7", "record_paths": 5, **_MC},
                   run_circle_jumps, 6),
    ExperimentSpec("exterior-escape-hemisphere", "sphere", "montecarlo", "CI-overlap",
                   "escape measure of the exterior of a ball is a constant multiple of surface measure, "
                   "and vanishes on bounded domains",
                   {"n_paths": 2000000, "dt": 1e-5, "horizon": 0.01, "window": 0.01, "R": 1.0,
                    "zero_paths": 2000, "geometry": "ball_exterior", **_MC}, run_exterior_escape, 7),
    ExperimentSpec("poisson-mass", "sphere", "quadrature", "absolute",
                   "Poisson kernel mass is 1 inside the ball and the hitting probability outside",
                   {"n_points": 20, "dims": "3,4,5", "tol": 1e-8}, run_poisson_mass, 8),
    ExperimentSpec("interval-refinement", "interval", "montecarlo", "CI-overlap",
                   "interval census approaches the Feller measure as the time step shrinks",
                   {"n_paths": 60000, "dts": "4e-5,1e-5,2.5e-6", "horizon": 1.0, **_MC}, run_refinement, 9),
    ExperimentSpec("exterior-hit-consistency", "sphere", "montecarlo", "CI-overlap",
                   "fraction of exterior paths that ever hit the sphere equals the hitting probability",
                   {"n_paths": 10000, "dt": 1e-3, "R": 1.0, "r0": 2.0, "r_escape": 4.0}, run_escape_consistency),
    ExperimentSpec("ball-douglas", "sphere", "cross-check", "relative",
                   "energy of the harmonic extension in a ball equals the sphere Douglas integral",
                   {"dims": "3,4", "rtol": 1e-6}, run_ball_douglas),
    ExperimentSpec("exterior-escape-constant", "sphere", "quadrature", "relative",
                   "alpha-escape measure of the constant function approaches v0 times the sphere area",
                   {"R": 1.0, "alpha": 1e6, "rtol": 1e-2}, run_sphere_escape_constant),
]}


def list_experiments(geometry: str | None = None) -> list[ExperimentSpec]:
    return [s for s in CATALOG.values() if geometry is None or s.geometry == geometry]


def validate(spec: ExperimentSpec, params: dict, seed: int) -> None:
    """Raise SpecValidationError for parameter sets the runner cannot accept."""
    if spec.route == "montecarlo":
        _cfg(params, seed)
    kind = params.get("geometry")
    if kind is not None and spec.runner is run_exterior_escape and kind not in COMPATIBILITY["escape_census"]:
        raise SpecValidationError(f"escape estimation is not defined on {kind}")
    for key in ("modes", "dims", "alphas", "dts", "bins", "arc_a", "arc_b"):
        if key in params:
            try:
                if key == "bins":
                    [tuple(int(v) for v in b.split("-")) for b in str(params[key]).split(",")]
                else:
                    _floats(params[key])
            except ValueError:
                raise SpecValidationError(f"{spec.name}.{key}: malformed list {params[key]!r}") from None
