"""Harmonic extensions, Dirichlet energies and Douglas integrals.

The circle Douglas integral is computed through the structure function
S(psi) = int (f(eta + psi) - f(eta))^2 d eta, so that

    D(f) = 1/2 int_0^{2 pi} S(psi) / (8 pi sin^2(psi / 2)) d psi,

where the numerator cancels the second-order pole of the kernel for Lipschitz f.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import eval_gegenbauer, roots_gegenbauer

from .boundary import (Arcs, Band, BoundaryFunction, Constant, Endpoints, Fourier, Tabulated,
                       Zonal, as_boundary_function, simplify)
from .errors import (BoundaryPointError, HypothesisViolationError, NumericalInconsistencyError,
                     UnsupportedDataError)
from .geometry import Geometry, check_interior, feller_kernel_sphere, poisson_kernel_ball
from .quadrature import (_unit_sphere_rule, composite_gauss_legendre, gauss_legendre, graded_edges,
                         sphere_rule, unit_sphere_area)
from .spectral import alpha_feller, alpha_feller_closed_form_interval, alpha_poisson_interval, feller_measure_limit

TWO_PI = 2.0 * math.pi
DELTA_Q = 1e-6
DEFAULT_RTOL = 1e-5
INTERVAL_ALPHAS = tuple(2.0 ** k for k in range(15))


# ---------------------------------------------------------------------------
# harmonic extension

def _arc_harmonic(s: float, L: float, z: complex) -> float:
    """Harmonic measure in the unit disk of the arc [s, s + L) seen from z."""
    if L >= TWO_PI:
        return 1.0
    a = np.exp(1j * s)
    b = np.exp(1j * (s + L))
    ang = np.mod(np.angle((b - z) / (a - z)), TWO_PI)
    return ang / math.pi - L / TWO_PI


def _sphere_about_pole(d: int, R: float, pole, levels: int = 30, n_sub: int = 64):
    """Nodes/weights on the sphere with polar angle graded toward ``pole``."""
    edges = graded_edges(0.0, math.pi, levels, "left")
    th, wt = composite_gauss_legendre(edges, 16)
    sub, wsub = _unit_sphere_rule(d - 1, max(8, n_sub // 2), n_sub, 0.0)
    p = np.asarray(pole, dtype=float)
    p = p / np.linalg.norm(p)
    q, _ = np.linalg.qr(np.column_stack([p, np.eye(d)]))
    frame = q[:, 1:d]                      # orthonormal complement of the pole
    dirs = sub @ frame.T                   # (n_sub_pts, d)
    pts = (np.cos(th)[:, None, None] * p[None, None, :]
           + np.sin(th)[:, None, None] * dirs[None, :, :]).reshape(-1, d)
    w = ((wt * np.sin(th) ** (d - 2))[:, None] * wsub[None, :]).ravel()
    return R * pts, w * R ** (d - 1)


def harmonic_extension(geom: Geometry, f, x) -> float:
    """Hf(x) = E^x[f(X_T); T < infinity]."""
    check_interior(geom, x)
    f = simplify(as_boundary_function(f))
    if geom.kind == "interval":
        x = float(x)
        if isinstance(f, Constant):
            return f.c
        if not isinstance(f, Endpoints):
            raise UnsupportedDataError("interval data must be endpoint values")
        return f.f0 * (1.0 - x) + f.f1 * x
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    if isinstance(f, Constant):
        if geom.kind in ("ball_exterior", "sphere_pair") and r > geom.R:
            return f.c * (geom.R / r) ** (geom.d - 2)
        return f.c
    if geom.boundary == "circle":
        z = complex(x[0], x[1])
        th0 = math.atan2(x[1], x[0])
        if isinstance(f, Fourier):
            n = f.modes
            return float(f.a0 + np.sum(r ** n * (f.a * np.cos(n * th0) + f.b * np.sin(n * th0))))
        if isinstance(f, Arcs):
            return float(sum(w * _arc_harmonic(s, L, z) for (s, L), w in zip(f.arcs, f.weights)))
        th = TWO_PI * np.arange(8192) / 8192
        k = (1.0 - r * r) / (TWO_PI * (1.0 - 2.0 * r * np.cos(th - th0) + r * r))
        return float(np.sum(k * f(th)) * TWO_PI / th.size)
    pole = x / r if r > 0 else np.eye(geom.d)[-1]
    pts, w = _sphere_about_pole(geom.d, geom.R, pole)
    return float(np.dot(w, poisson_kernel_ball(geom.d, geom.R, x, pts) * f(pts)))


# ---------------------------------------------------------------------------
# Dirichlet energy

def _gegenbauer_energy(d: int, R: float, f, side: str, lmax: int = 64) -> float:
    """1/2 int |grad Hf|^2 for zonal data on a sphere, side in {'interior', 'exterior'}."""
    lam = 0.5 * (d - 2)
    t, wt = roots_gegenbauer(2 * lmax + 2, lam)
    vals = np.asarray(f.profile(t), dtype=float)
    total = 0.0
    area = unit_sphere_area(d - 1) * R ** (d - 1)
    for l in range(lmax + 1):
        cl = eval_gegenbauer(l, lam, t)
        h = float(np.dot(wt, cl * cl))
        coef = float(np.dot(wt, vals * cl)) / h
        norm2 = coef * coef * h * area
        rate = l / R if side == "interior" else (l + d - 2) / R
        total += 0.5 * rate * norm2
    return total


def dirichlet_energy(geom: Geometry, f) -> float:
    """1/2 int_G |grad Hf|^2 dx.

    Circle data use the mode rule (pi/2) sum n (a_n^2 + b_n^2); tabulated data
    are represented by their trigonometric interpolant.  Indicators of proper
    arcs or bands have infinite energy.
    """
    f = simplify(as_boundary_function(f))
    if isinstance(f, Constant):
        if geom.kind in ("ball_exterior", "sphere_pair"):
            return 0.5 * f.c ** 2 * (geom.d - 2) * unit_sphere_area(geom.d) * geom.R ** (geom.d - 2)
        return 0.0
    if geom.kind == "interval":
        if not isinstance(f, Endpoints):
            raise UnsupportedDataError("interval data must be endpoint values")
        return 0.5 * (f.f1 - f.f0) ** 2
    if geom.boundary == "circle":
        if isinstance(f, Fourier):
            n = f.modes
            return 0.5 * math.pi * float(np.sum(n * (f.a ** 2 + f.b ** 2)))
        if isinstance(f, Arcs):
            if all(L >= TWO_PI for _, L in f.arcs):
                return 0.0
            return math.inf
        raise UnsupportedDataError(f"no energy representation for {type(f).__name__} on the circle")
    if isinstance(f, Band):
        return 0.0 if (f.lo <= -1.0 and f.hi >= 1.0) else math.inf
    if isinstance(f, Zonal):
        sides = {"ball_interior": ["interior"], "ball_exterior": ["exterior"],
                 "sphere_pair": ["interior", "exterior"]}[geom.kind]
        return sum(_gegenbauer_energy(geom.d, geom.R, f, s) for s in sides)
    raise UnsupportedDataError(f"no energy representation for {type(f).__name__} on the sphere")


# ---------------------------------------------------------------------------
# Douglas integral

def _structure_function(f, psi: np.ndarray) -> np.ndarray:
    """S(psi) = int_0^{2 pi} (f(eta + psi) - f(eta))^2 d eta."""
    if isinstance(f, Arcs):
        bps = f.circle_breakpoints()
        out = np.empty(psi.size)
        for i, p in enumerate(psi):
            cuts = np.unique(np.mod(np.concatenate([bps, bps - p, [0.0]]), TWO_PI))
            cuts = np.append(cuts, TWO_PI)
            mid = 0.5 * (cuts[:-1] + cuts[1:])
            diff = f(mid + p) - f(mid)
            out[i] = float(np.dot(np.diff(cuts), diff * diff))
        return out
    if isinstance(f, Fourier):
        n_eta = max(64, 4 * f.a.size + 8)
    else:
        n_eta = 4096
    eta = TWO_PI * np.arange(n_eta) / n_eta
    fe = f(eta)
    out = np.empty(psi.size)
    for lo in range(0, psi.size, 256):
        p = psi[lo:lo + 256]
        diff = f(eta[None, :] + p[:, None]) - fe[None, :]
        out[lo:lo + 256] = np.sum(diff * diff, axis=1) * (TWO_PI / n_eta)
    return out


def _kernel_weighted(f, psi):
    return _structure_function(f, psi) / (8.0 * math.pi * np.sin(0.5 * psi) ** 2)


@dataclass
class DouglasResult:
    value: float
    divergent: bool
    diagnostics: dict = field(default_factory=dict)


def douglas_circle(f, delta: float = DELTA_Q, panels: int = 64, probe_start: float = 1e-2,
                   probe_levels: int = 6) -> DouglasResult:
    """Douglas integral on the unit circle with divergence diagnostics."""
    f = simplify(as_boundary_function(f))
    if isinstance(f, Constant):
        return DouglasResult(0.0, False, {})
    if isinstance(f, Tabulated):
        f = f.to_fourier()
    # near-diagonal shells [d_{k+1}, d_k], d_k = probe_start 4^-k
    shells = []
    d_k = probe_start
    for _ in range(probe_levels):
        x, w = gauss_legendre(d_k / 4.0, d_k, 24)
        shells.append(float(np.dot(w, _kernel_weighted(f, x))))
        d_k /= 4.0
    shells = np.array(shells)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = shells[:-1] / shells[1:]
    slow = ratios < 1.5
    run = 0
    divergent = False
    for s in slow:
        run = run + 1 if s else 0
        if run >= 3:
            divergent = True
            break
    diag = {"shell_contributions": shells.tolist(), "contraction_ratios": ratios.tolist()}
    if divergent:
        return DouglasResult(math.inf, True, diag)
    edges = np.unique(np.concatenate([graded_edges(delta, TWO_PI - delta, 20, "both"),
                                      np.linspace(delta, TWO_PI - delta, panels + 1)]))
    x, w = composite_gauss_legendre(edges, 16)
    main = float(np.dot(w, _kernel_weighted(f, x)))
    # the integrand tends to c = lim S(psi) / (2 pi psi^2) at both ends of the window
    c = float(_structure_function(f, np.array([delta]))[0]) / (TWO_PI * delta * delta)
    corr = 2.0 * delta * c
    diag.update({"main": main, "small_psi_correction": corr, "delta": delta, "nodes": int(x.size)})
    return DouglasResult(0.5 * (main + corr), False, diag)


def _douglas_sphere(geom: Geometry, f, n_outer: int = 48, n_inner: int = 48) -> float:
    d, R = geom.d, geom.R
    side = {"ball_interior": "interior", "ball_exterior": "exterior", "sphere_pair": "pair"}[geom.kind]
    factor = {"pair": 2.0, "interior": 1.0, "exterior": 1.0}[side] / unit_sphere_area(d)
    if isinstance(f, Band) and not (f.lo <= -1.0 and f.hi >= 1.0):
        return math.inf
    # inner rule: pole at xi with (1 - t)^(1 - d/2) absorbed into Gauss-Jacobi, leaving
    # (f(xi) - f(eta))^2 / (1 - t), which stays bounded for Lipschitz f
    sing = 1.0 - 0.5 * d
    unit_in, w_in, t_in = sphere_rule(d, 1.0, n_polar=n_inner, pole_singularity=sing)
    scale = (2.0 * R * R) ** (-0.5 * d) * R ** (d - 1)
    tw = w_in * (1.0 - t_in) ** (-1.0) * scale * factor
    if isinstance(f, Zonal) or isinstance(f, Constant):
        th, wt = gauss_legendre(0.0, math.pi, n_outer)
        outer_w = unit_sphere_area(d - 1) * R ** (d - 1) * wt * np.sin(th) ** (d - 2)
        north = np.zeros(d)
        north[-1] = 1.0
        side_dir = np.zeros(d)
        side_dir[0] = 1.0
        xis = R * (np.cos(th)[:, None] * north + np.sin(th)[:, None] * side_dir)
    else:
        xis, outer_w, _ = sphere_rule(d, R, n_polar=n_outer // 2)
    total = 0.0
    for xi, wo in zip(xis, outer_w):
        p = xi / R
        q, _ = np.linalg.qr(np.column_stack([p, np.eye(d)]))
        frame = np.column_stack([p, q[:, 1:d]])
        etas = R * unit_in @ frame.T
        diff = f(xi[None, :]) - f(etas)
        total += wo * float(np.dot(tw, diff * diff))
    return 0.5 * total


def douglas_integral(geom: Geometry, f) -> float:
    """1/2 double integral of (f(xi) - f(eta))^2 U(xi, eta) mu(d xi) mu(d eta), off the diagonal."""
    f = simplify(as_boundary_function(f))
    if geom.kind == "interval":
        if isinstance(f, Constant):
            return 0.0
        if not isinstance(f, Endpoints):
            raise UnsupportedDataError("interval data must be endpoint values")
        u01 = interval_feller_offdiagonal()
        # ordered pairs (0, 1) and (1, 0)
        return 0.5 * 2.0 * (f.f1 - f.f0) ** 2 * u01
    if geom.boundary == "circle":
        return douglas_circle(f).value
    return _douglas_sphere(geom, f)


def interval_feller_offdiagonal() -> float:
    """U({0} x {1}) on the interval as the certified alpha-limit."""
    lim = feller_measure_limit(Geometry.interval(), Endpoints.indicator(0), Endpoints.indicator(1),
                               INTERVAL_ALPHAS)
    return lim.value


# ---------------------------------------------------------------------------
# finite-alpha energy identity

def energy_identity_sides(alpha: float, u, panels: int = 64, nodes: int = 8) -> tuple[float, float]:
    """Both sides of the finite-alpha energy identity on the interval.

    LHS = alpha (H^alpha 1, w) + alpha int (Hu(x) - u(xi))^2 H^alpha(x, d xi) dx with
    w = H(u^2) - (Hu)^2, by composite Gauss-Legendre; RHS in closed form.
    """
    u = simplify(as_boundary_function(u))
    if isinstance(u, Constant):
        u = Endpoints(u.c, u.c)
    if not isinstance(u, Endpoints):
        raise UnsupportedDataError("interval data must be endpoint values")
    x, w = composite_gauss_legendre(np.linspace(0.0, 1.0, panels + 1), nodes)
    k0 = alpha_poisson_interval(alpha, x, 0)
    k1 = alpha_poisson_interval(alpha, x, 1)
    hu = u.f0 * (1.0 - x) + u.f1 * x
    hu2 = u.f0 ** 2 * (1.0 - x) + u.f1 ** 2 * x
    wfun = hu2 - hu * hu
    lhs = alpha * float(np.dot(w, (k0 + k1) * wfun))
    lhs += alpha * float(np.dot(w, (hu - u.f0) ** 2 * k0 + (hu - u.f1) ** 2 * k1))
    rhs = 2.0 * (u.f1 - u.f0) ** 2 * alpha_feller_closed_form_interval(alpha)["01"]
    return lhs, rhs


def energy_identity_residual(geom: Geometry, alpha: float, u, panels: int = 64, nodes: int = 8) -> float:
    """|LHS - RHS| of the finite-alpha energy identity."""
    if geom.kind != "interval":
        raise UnsupportedDataError("the energy identity check is implemented on the interval")
    lhs, rhs = energy_identity_sides(alpha, u, panels=panels, nodes=nodes)
    return abs(lhs - rhs)


# ---------------------------------------------------------------------------
# energy vs Douglas

@dataclass
class EnergyReport:
    dirichlet_energy: float
    douglas_value: float
    abs_gap: float
    rel_gap: float
    passed: bool
    divergent: bool = False
    diagnostics: dict = field(default_factory=dict)


def energy_vs_douglas(geom: Geometry, f, rtol: float = DEFAULT_RTOL) -> EnergyReport:
    if geom.kind in ("ball_exterior", "sphere_pair"):
        raise HypothesisViolationError(
            "trace equality needs m(G) < infinity; on unbounded G only the one-sided bound holds")
    f = simplify(as_boundary_function(f))
    diag = {}
    if geom.boundary == "circle":
        res = douglas_circle(f)
        dv, divergent, diag = res.value, res.divergent, res.diagnostics
    else:
        dv = douglas_integral(geom, f)
        divergent = math.isinf(dv)
    try:
        de = dirichlet_energy(geom, f)
    except UnsupportedDataError:
        de = math.nan
    if divergent or math.isinf(dv):
        return EnergyReport(de, math.inf, math.inf, math.inf, False, True, diag)
    gap = abs(de - dv)
    rel = gap / max(dv, 1e-12)
    if dv < 0 or de < 0:
        raise NumericalInconsistencyError("negative energy")
    return EnergyReport(de, dv, gap, rel, bool(rel < rtol), False, diag)
