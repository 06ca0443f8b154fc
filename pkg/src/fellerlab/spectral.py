"""Absorbed semigroups, alpha-order hitting kernels and Feller/supplementary measures.

On the interval the process is Brownian motion (generator Laplacian / 2) killed
at {0, 1}: eigenfunctions sqrt(2) sin(k pi x), eigenvalues k^2 pi^2 / 2.  Small
times use the method of images instead of the sine series.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import ive, kve

from .boundary import (BoundaryFunction, Constant, Endpoints, Fourier, as_boundary_function,
                       simplify)
from .errors import (NotExcessiveError, NumericalInconsistencyError, UnsupportedDataError,
                     SpecValidationError)
from .geometry import Geometry, escape_probability
from .quadrature import (composite_gauss_legendre, gauss_legendre, graded_edges, interval_rule,
                         unit_sphere_area)

SMALL_T = 1e-3
MONOTONE_TOL = 1e-9


def _require_interval(geom: Geometry, what: str) -> None:
    if geom.kind != "interval":
        raise UnsupportedDataError(f"{what} is implemented for the interval only")


def _check_t(t: float) -> None:
    if not t > 0:
        raise ValueError(f"time must be positive, got {t}")


def image_kernel(t: float, x, y, n_images: int | None = None):
    """Density of Brownian motion on (0, 1) killed at the ends, by reflection images."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if n_images is None:
        n_images = max(2, int(math.ceil(6.0 * math.sqrt(t))) + 2)
    c = 1.0 / math.sqrt(2.0 * math.pi * t)
    out = np.zeros(np.broadcast(x, y).shape)
    for n in range(-n_images, n_images + 1):
        a = y - x + 2 * n
        b = y + x + 2 * n
        out += c * (np.exp(-a * a / (2 * t)) - np.exp(-b * b / (2 * t)))
    return out


@dataclass
class AbsorbedSemigroup:
    geometry: Geometry
    eigen_truncation: int = 512

    def __post_init__(self):
        if self.eigen_truncation < 1:
            raise SpecValidationError("eigen_truncation must be >= 1")
        if self.geometry.kind not in ("interval", "disk"):
            raise UnsupportedDataError("absorbed semigroup: interval (full) or disk (energy only)")

    @property
    def modes(self) -> np.ndarray:
        return np.arange(1, self.eigen_truncation + 1)

    @property
    def eigenvalues(self) -> np.ndarray:
        k = self.modes
        return 0.5 * (k * math.pi) ** 2

    def eigenfunctions(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return math.sqrt(2.0) * np.sin(np.multiply.outer(x, self.modes) * math.pi)

    def sine_coefficients(self, u) -> np.ndarray:
        """c_k = <u, sqrt(2) sin(k pi .)> for a callable u on (0, 1)."""
        _require_interval(self.geometry, "sine projection")
        panels = max(64, self.eigen_truncation // 2)
        x, w = composite_gauss_legendre(np.linspace(0.0, 1.0, panels + 1), 16)
        return (w * np.asarray(u(x), dtype=float)) @ self.eigenfunctions(x)

    def kernel(self, t: float, x, y):
        """p_t^0(x, y)."""
        _check_t(t)
        _require_interval(self.geometry, "absorbed heat kernel")
        if t < SMALL_T:
            return image_kernel(t, x, y)
        ex = self.eigenfunctions(x)
        ey = self.eigenfunctions(y)
        return (ex * ey * np.exp(-self.eigenvalues * t)).sum(axis=-1)

    def apply(self, t: float, u) -> Callable:
        return apply_absorbed_semigroup(self, t, u)


def _as_callable_on_G(u):
    if isinstance(u, ExcessiveFunction):
        return u.values
    if callable(u):
        return u
    raise UnsupportedDataError("u must be callable on G or an ExcessiveFunction")


def apply_absorbed_semigroup(sg: AbsorbedSemigroup, t: float, u) -> Callable:
    """p_t^0 u as a vectorized function of x.

    ``u`` may be a callable on (0, 1) or an array of sine coefficients.
    """
    _check_t(t)
    _require_interval(sg.geometry, "apply_absorbed_semigroup")
    if not callable(u) and not isinstance(u, ExcessiveFunction):
        coef = np.asarray(u, dtype=float)
        k = np.arange(1, coef.size + 1)
        damp = coef * np.exp(-0.5 * (k * math.pi) ** 2 * t)
        return lambda x: (math.sqrt(2.0) * np.sin(np.multiply.outer(np.asarray(x, float), k) * math.pi)) @ damp
    fn = _as_callable_on_G(u)
    if t >= SMALL_T:
        damp = sg.sine_coefficients(fn) * np.exp(-sg.eigenvalues * t)
        return lambda x: sg.eigenfunctions(x) @ damp

    half = 12.0 * math.sqrt(t)
    gx, gw = gauss_legendre(-1.0, 1.0, 48)

    def smoothed(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty(x.shape)
        for i, xi in np.ndenumerate(x):
            lo, hi = max(0.0, xi - half), min(1.0, xi + half)
            parts = [lo, xi, hi] if lo < xi < hi else [lo, hi]
            acc = 0.0
            for a, b in zip(parts[:-1], parts[1:]):
                if b <= a:
                    continue
                y = 0.5 * (a + b) + 0.5 * (b - a) * gx
                acc += 0.5 * (b - a) * np.dot(gw, image_kernel(t, xi, y) * fn(y))
            out[i] = acc
        return out
    return smoothed


class ExcessiveFunction:
    """A nonnegative excessive function of the absorbed process on the interval.

    ``kind`` is 'harmonic' (Hf of boundary data f >= 0), 'escape' (q) or
    'closed_form' (a user callable, checked numerically for excessiveness).
    """

    def __init__(self, geometry: Geometry, kind: str, values: Callable,
                 boundary_data: BoundaryFunction | None = None, check: bool = True):
        self.geometry = geometry
        self.kind = kind
        self.values = values
        self.boundary_data = boundary_data
        if check:
            self._check()

    @classmethod
    def harmonic(cls, geometry: Geometry, f) -> "ExcessiveFunction":
        f = simplify(as_boundary_function(f))
        if geometry.kind != "interval":
            raise UnsupportedDataError("harmonic excessive functions: interval only")
        if isinstance(f, Constant):
            f = Endpoints(f.c, f.c)
        if not isinstance(f, Endpoints):
            raise UnsupportedDataError("interval data must be endpoint values")
        if f.f0 < 0 or f.f1 < 0:
            raise NotExcessiveError("harmonic extension of signed data is not excessive")
        f0, f1 = f.f0, f.f1
        return cls(geometry, "harmonic", lambda x: f0 * (1.0 - np.asarray(x)) + f1 * np.asarray(x), f,
                   check=False)

    @classmethod
    def escape(cls, geometry: Geometry) -> "ExcessiveFunction":
        if geometry.recurrent:
            return cls(geometry, "escape", lambda x: np.zeros(np.shape(x)), check=False)
        return cls(geometry, "escape", lambda x: _escape_values(geometry, x), check=False)

    @classmethod
    def closed_form(cls, geometry: Geometry, fn: Callable) -> "ExcessiveFunction":
        return cls(geometry, "closed_form", fn, check=True)

    def _check(self):
        if self.geometry.kind != "interval":
            raise UnsupportedDataError("excessiveness check implemented for the interval")
        x = np.linspace(0.0, 1.0, 203)[1:-1]
        u = np.asarray(self.values(x), dtype=float)
        scale = max(1.0, float(np.max(np.abs(u))))
        if np.any(u < -1e-12 * scale):
            raise NotExcessiveError("function takes negative values")
        sg = AbsorbedSemigroup(self.geometry, 256)
        for t in (0.3, 0.03, 0.003):
            pu = apply_absorbed_semigroup(sg, t, self.values)(x)
            if np.any(pu > u + 1e-6 * scale):
                raise NotExcessiveError(f"p_t u exceeds u at t = {t}")

    def __call__(self, x):
        return self.values(x)


def _escape_values(geom: Geometry, x):
    r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
    return np.where(r > geom.R, 1.0 - (geom.R / np.maximum(r, geom.R)) ** (geom.d - 2), 0.0)


def _as_excessive(geom: Geometry, u) -> ExcessiveFunction:
    if isinstance(u, ExcessiveFunction):
        return u
    if isinstance(u, (BoundaryFunction, int, float)):
        return ExcessiveFunction.harmonic(geom, u)
    if callable(u):
        return ExcessiveFunction.closed_form(geom, u)
    raise UnsupportedDataError(f"cannot interpret {type(u).__name__} as an excessive function")


def energy_functional_t(sg: AbsorbedSemigroup, u, v, t: float) -> float:
    """(1/t) <u - p_t^0 u, v> over G for excessive u, v."""
    _check_t(t)
    _require_interval(sg.geometry, "energy_functional_t")
    u = _as_excessive(sg.geometry, u)
    v = _as_excessive(sg.geometry, v)
    if t >= SMALL_T:
        x, w = interval_rule(256)
        uv = float(np.dot(w, u(x) * v(x)))
        cu = sg.sine_coefficients(u.values)
        cv = sg.sine_coefficients(v.values)
        return (uv - float(np.sum(cu * cv * np.exp(-sg.eigenvalues * t)))) / t
    # resolve the boundary layer of width ~sqrt(t)
    levels = int(math.ceil(math.log2(0.5 / (0.125 * math.sqrt(t)))))
    x, w = composite_gauss_legendre(graded_edges(0.0, 1.0, levels, "both"), 16)
    pu = apply_absorbed_semigroup(sg, t, u.values)(x)
    return float(np.dot(w, (u(x) - pu) * v(x))) / t


def alpha_poisson_interval(alpha: float, x, endpoint: int):
    """E^x[exp(-alpha T); X_T = endpoint] on (0, 1)."""
    if endpoint not in (0, 1):
        raise ValueError("endpoint must be 0 or 1")
    x = np.asarray(x, dtype=float)
    y = 1.0 - x if endpoint == 0 else x
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if alpha == 0:
        out = y
    else:
        beta = math.sqrt(2.0 * alpha)
        # sinh(beta y) / sinh(beta) written with decaying exponentials
        out = np.exp(-beta * (1.0 - y)) * np.expm1(-2.0 * beta * y) / math.expm1(-2.0 * beta)
    return float(out) if np.ndim(out) == 0 else out


def alpha_feller_closed_form_interval(alpha: float) -> dict:
    """Closed forms on the interval: U_alpha of {0}x{1}, {0}x{0} and 1x1."""
    beta = math.sqrt(2.0 * alpha)
    off = 0.5 - beta / (2.0 * math.sinh(beta)) if beta < 700 else 0.5
    diag = 0.5 * beta / math.tanh(beta) - 0.5
    return {"01": off, "00": diag, "11total": beta * math.tanh(0.5 * beta)}


def _radial_hitting(geom: Geometry, alpha: float, r):
    """E^x[exp(-alpha T)] for |x| = r with constant unit data on a sphere of radius R."""
    d, R = geom.d, geom.R
    nu = 0.5 * d - 1.0
    r = np.asarray(r, dtype=float)
    if alpha == 0:
        if geom.kind == "ball_exterior":
            return (R / r) ** (d - 2)
        return np.ones_like(r)
    beta = math.sqrt(2.0 * alpha)
    if geom.kind == "ball_exterior":
        return (r / R) ** (-nu) * kve(nu, beta * r) / kve(nu, beta * R) * np.exp(-beta * (r - R))
    return (r / R) ** (-nu) * ive(nu, beta * r) / ive(nu, beta * R) * np.exp(beta * (r - R))


def _radial_rule(geom: Geometry, alpha: float, n_per_panel: int = 16):
    R = geom.R
    if geom.kind == "ball_exterior":
        scale = 1.0 / math.sqrt(2.0 * alpha) if alpha > 0 else R
        r_cut = R + 60.0 * scale
        levels = max(4, int(math.ceil(math.log2((r_cut - R) / (0.05 * scale)))))
        edges = graded_edges(R, r_cut, levels, "left")
        r, w = composite_gauss_legendre(edges, n_per_panel)
        return r, w
    scale = 1.0 / math.sqrt(2.0 * alpha) if alpha > 0 else R
    levels = max(4, int(math.ceil(math.log2(R / (0.05 * min(scale, R))))))
    edges = graded_edges(0.0, R, levels, "right")
    return composite_gauss_legendre(edges, n_per_panel)


def _constant_value(f, what: str) -> float:
    f = simplify(as_boundary_function(f))
    if isinstance(f, Constant):
        return f.c
    if isinstance(f, Fourier) and not np.any(f.a) and not np.any(f.b):
        return f.a0
    raise UnsupportedDataError(f"{what}: only spherically symmetric (constant) data supported here")


def _endpoint_values(f) -> tuple[float, float]:
    f = simplify(as_boundary_function(f))
    if isinstance(f, Constant):
        return f.c, f.c
    if isinstance(f, Endpoints):
        return f.f0, f.f1
    raise UnsupportedDataError("interval data must be endpoint values")


def alpha_feller(geom: Geometry, alpha: float, f, g, n_nodes: int = 256) -> float:
    """U_alpha(f x g) = alpha <H^alpha f, H g> over G, by quadrature."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if geom.kind == "interval":
        f0, f1 = _endpoint_values(f)
        g0, g1 = _endpoint_values(g)
        x, w = interval_rule(n_nodes)
        # beyond the rule's resolution the hitting kernel lives inside the first panel
        beta = math.sqrt(2.0 * alpha)
        if beta * 2.0 ** -(n_nodes // 32 + 1) > 2.0:
            levels = int(math.ceil(math.log2(beta))) + 2
            x, w = composite_gauss_legendre(graded_edges(0.0, 1.0, levels, "both"), 16)
        ha = f0 * alpha_poisson_interval(alpha, x, 0) + f1 * alpha_poisson_interval(alpha, x, 1)
        h = g0 * (1.0 - x) + g1 * x
        return alpha * float(np.dot(w, ha * h))
    if geom.kind in ("disk", "ball_interior", "ball_exterior"):
        cf = _constant_value(f, "alpha_feller")
        cg = _constant_value(g, "alpha_feller")
        r, w = _radial_rule(geom, alpha)
        dens = unit_sphere_area(geom.d) * r ** (geom.d - 1)
        return alpha * cf * cg * float(np.dot(w, dens * _radial_hitting(geom, alpha, r)
                                              * _radial_hitting(geom, 0.0, r)))
    raise UnsupportedDataError(f"alpha_feller not available for {geom.kind}")


@dataclass
class FellerLimit:
    value: float
    extrapolated: float
    alphas: np.ndarray
    iterates: np.ndarray
    max_violation: float
    diagnostics: dict = field(default_factory=dict)


def feller_measure_limit(geom: Geometry, f, g, alpha_schedule, tol: float = MONOTONE_TOL) -> FellerLimit:
    """Limit of U_alpha(f x g) along an increasing schedule, with a monotonicity certificate.

    ``value`` is the largest-alpha iterate; ``extrapolated`` removes the
    leading alpha^(-1/2) error term from the last two iterates.
    """
    alphas = np.asarray(alpha_schedule, dtype=float)
    if alphas.size < 3 or np.any(np.diff(alphas) <= 0) or alphas[0] <= 0:
        raise SpecValidationError("alpha schedule must be positive, strictly increasing, length >= 3")
    it = np.array([alpha_feller(geom, a, f, g) for a in alphas])
    drops = -np.diff(it)
    max_violation = float(max(0.0, drops.max()))
    if max_violation > tol:
        k = int(np.argmax(drops))
        raise NumericalInconsistencyError(
            f"U_alpha decreased by {max_violation:.3e} between alpha={alphas[k]} and {alphas[k + 1]}")
    ratio = math.sqrt(alphas[-1] / alphas[-2])
    extrap = (ratio * it[-1] - it[-2]) / (ratio - 1.0)
    return FellerLimit(float(it[-1]), float(extrap), alphas, it, max_violation,
                       {"increments": np.diff(it).tolist()})


def supplementary_feller(geom: Geometry, alpha: float, f) -> float:
    """V(f) = alpha <H^alpha f, q> over G; zero for domains of finite volume."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if geom.kind in ("interval", "disk", "ball_interior"):
        return 0.0
    if geom.kind != "ball_exterior":
        raise UnsupportedDataError(f"supplementary_feller not available for {geom.kind}")
    c = _constant_value(f, "supplementary_feller")
    r, w = _radial_rule(geom, alpha)
    dens = unit_sphere_area(geom.d) * r ** (geom.d - 1)
    q = 1.0 - (geom.R / r) ** (geom.d - 2)
    return alpha * c * float(np.dot(w, dens * _radial_hitting(geom, alpha, r) * q))


def escape_constant_exact(geom: Geometry) -> float:
    """Density v0 of V = v0 * sigma for the exterior of a sphere in R^3."""
    if geom.kind != "ball_exterior" or geom.d != 3:
        raise UnsupportedDataError("closed form available for the exterior ball in d = 3")
    return 1.0 / (2.0 * geom.R)


__all__ = [
    "AbsorbedSemigroup", "ExcessiveFunction", "FellerLimit", "apply_absorbed_semigroup",
    "energy_functional_t", "alpha_poisson_interval", "alpha_feller", "feller_measure_limit",
    "supplementary_feller", "image_kernel", "alpha_feller_closed_form_interval",
    "escape_constant_exact", "escape_probability",
]
