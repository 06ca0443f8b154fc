"""Functions on the boundary F of a model domain.

Every class evaluates on the geometry's point convention (endpoint floats,
angles, or ``(..., d)`` arrays) and knows how to integrate itself against mu.
Piecewise-constant representations also expose their breakpoints, which the
Monte Carlo census uses as its bin partition.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy.special import betainc, beta as beta_fn

from .errors import SpecValidationError, UnsupportedDataError
from .quadrature import composite_gauss_legendre, graded_edges, sphere_rule, unit_sphere_area

TWO_PI = 2.0 * math.pi


def _wrap(theta):
    return np.mod(np.asarray(theta, dtype=float), TWO_PI)


class BoundaryFunction:
    #: breakpoints for piecewise-constant data; None when not piecewise constant
    piecewise_constant = False

    def __call__(self, pts):
        raise NotImplementedError

    def integrate(self, geom) -> float:
        raise NotImplementedError

    def circle_breakpoints(self) -> np.ndarray | None:
        return None

    def zonal_breakpoints(self) -> np.ndarray | None:
        """Breakpoints in t = cos(polar angle) w.r.t. the north pole."""
        return None

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Constant(float(other))
        return Combination([(1.0, self), (1.0, as_boundary_function(other))])

    __radd__ = __add__

    def __neg__(self):
        return Combination([(-1.0, self)])

    def __sub__(self, other):
        return self + (-as_boundary_function(other) if not isinstance(other, (int, float)) else -other)

    def __mul__(self, c):
        if not isinstance(c, (int, float)):
            return NotImplemented
        return Combination([(float(c), self)])

    __rmul__ = __mul__


def as_boundary_function(f) -> BoundaryFunction:
    if isinstance(f, BoundaryFunction):
        return f
    if isinstance(f, (int, float)):
        return Constant(float(f))
    if callable(f):
        return Callable_(f)
    raise UnsupportedDataError(f"cannot interpret {type(f).__name__} as boundary data")


class Constant(BoundaryFunction):
    piecewise_constant = True

    def __init__(self, c: float):
        self.c = float(c)

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        shape = pts.shape[:-1] if pts.ndim >= 2 else pts.shape
        out = np.full(shape, self.c)
        return float(out) if out.ndim == 0 else out

    def integrate(self, geom) -> float:
        return self.c * geom.boundary_mass

    def circle_breakpoints(self):
        return np.empty(0)

    def zonal_breakpoints(self):
        return np.empty(0)

    def __add__(self, other):
        if isinstance(other, (int, float)):
            return Constant(self.c + other)
        if isinstance(other, Constant):
            return Constant(self.c + other.c)
        if isinstance(other, (Fourier, Endpoints)):
            return other + self
        return super().__add__(other)

    __radd__ = __add__

    def __neg__(self):
        return Constant(-self.c)

    def __mul__(self, c):
        return Constant(self.c * c) if isinstance(c, (int, float)) else NotImplemented

    __rmul__ = __mul__

    def __repr__(self):
        return f"Constant({self.c})"


class Endpoints(BoundaryFunction):
    """Values (f(0), f(1)) on the two-point boundary of the interval."""
    piecewise_constant = True

    def __init__(self, f0: float, f1: float):
        self.f0 = float(f0)
        self.f1 = float(f1)

    @classmethod
    def indicator(cls, endpoint: int) -> "Endpoints":
        if endpoint not in (0, 1):
            raise ValueError("endpoint must be 0 or 1")
        return cls(1.0, 0.0) if endpoint == 0 else cls(0.0, 1.0)

    def __call__(self, pts):
        x = np.asarray(pts, dtype=float)
        out = np.where(x < 0.5, self.f0, self.f1)
        return float(out) if out.ndim == 0 else out

    def integrate(self, geom) -> float:
        return self.f0 + self.f1

    def __add__(self, other):
        if isinstance(other, Endpoints):
            return Endpoints(self.f0 + other.f0, self.f1 + other.f1)
        if isinstance(other, (int, float, Constant)):
            c = other.c if isinstance(other, Constant) else float(other)
            return Endpoints(self.f0 + c, self.f1 + c)
        return super().__add__(other)

    __radd__ = __add__

    def __neg__(self):
        return Endpoints(-self.f0, -self.f1)

    def __mul__(self, c):
        return Endpoints(self.f0 * c, self.f1 * c) if isinstance(c, (int, float)) else NotImplemented

    __rmul__ = __mul__

    def __repr__(self):
        return f"Endpoints({self.f0}, {self.f1})"


class Fourier(BoundaryFunction):
    """a0 + sum_n a_n cos(n theta) + b_n sin(n theta), n = 1..N."""

    def __init__(self, a0: float = 0.0, a=(), b=()):
        a = np.asarray(a, dtype=float).ravel()
        b = np.asarray(b, dtype=float).ravel()
        n = max(a.size, b.size)
        self.a0 = float(a0)
        self.a = np.zeros(n)
        self.b = np.zeros(n)
        self.a[:a.size] = a
        self.b[:b.size] = b

    @classmethod
    def cos(cls, n: int, amplitude: float = 1.0) -> "Fourier":
        if n == 0:
            return cls(amplitude)
        a = np.zeros(n)
        a[n - 1] = amplitude
        return cls(0.0, a)

    @classmethod
    def sin(cls, n: int, amplitude: float = 1.0) -> "Fourier":
        b = np.zeros(n)
        b[n - 1] = amplitude
        return cls(0.0, (), b)

    @property
    def modes(self) -> np.ndarray:
        return np.arange(1, self.a.size + 1)

    def __call__(self, theta):
        th = np.asarray(theta, dtype=float)
        n = self.modes
        arg = th[..., None] * n
        out = self.a0 + np.cos(arg) @ self.a + np.sin(arg) @ self.b
        return float(out) if out.ndim == 0 else out

    def derivative(self, theta):
        th = np.asarray(theta, dtype=float)
        n = self.modes
        arg = th[..., None] * n
        return np.cos(arg) @ (n * self.b) - np.sin(arg) @ (n * self.a)

    def integrate(self, geom) -> float:
        return TWO_PI * self.a0

    def _binop(self, other, sign):
        n = max(self.a.size, other.a.size)
        a = np.zeros(n)
        b = np.zeros(n)
        a[:self.a.size] += self.a
        b[:self.b.size] += self.b
        a[:other.a.size] += sign * other.a
        b[:other.b.size] += sign * other.b
        return Fourier(self.a0 + sign * other.a0, a, b)

    def __add__(self, other):
        if isinstance(other, Fourier):
            return self._binop(other, 1.0)
        if isinstance(other, (int, float, Constant)):
            c = other.c if isinstance(other, Constant) else float(other)
            return Fourier(self.a0 + c, self.a, self.b)
        return super().__add__(other)

    __radd__ = __add__

    def __neg__(self):
        return Fourier(-self.a0, -self.a, -self.b)

    def __mul__(self, c):
        if not isinstance(c, (int, float)):
            return NotImplemented
        return Fourier(self.a0 * c, self.a * c, self.b * c)

    __rmul__ = __mul__

    def __repr__(self):
        return f"Fourier(a0={self.a0}, a={self.a.tolist()}, b={self.b.tolist()})"


class Arcs(BoundaryFunction):
    """Weighted sum of indicators of half-open arcs [start, end) on the circle.

    Arcs may wrap through 0 (pass ``end > 2 pi`` or ``end < start``); they
    must be pairwise disjoint.
    """
    piecewise_constant = True

    def __init__(self, arcs, weights=None):
        arcs = [(float(s), float(e)) for s, e in arcs]
        norm = []
        for s, e in arcs:
            length = e - s
            if length <= 0:
                length += TWO_PI
            if not 0 < length <= TWO_PI + 1e-15:
                raise SpecValidationError(f"bad arc [{s}, {e})")
            norm.append((float(_wrap(s)), min(length, TWO_PI)))
        self.arcs = norm
        self.weights = np.ones(len(norm)) if weights is None else np.asarray(weights, dtype=float)
        if self.weights.shape != (len(norm),):
            raise SpecValidationError("one weight per arc required")
        self._check_disjoint()

    @classmethod
    def indicator(cls, start: float, end: float) -> "Arcs":
        return cls([(start, end)])

    def _check_disjoint(self):
        for i in range(len(self.arcs)):
            for j in range(i + 1, len(self.arcs)):
                if _arc_overlap(self.arcs[i], self.arcs[j]) > 1e-14:
                    raise SpecValidationError("arcs within one function must be disjoint")

    def __call__(self, theta):
        th = _wrap(theta)
        out = np.zeros_like(th)
        for (s, L), w in zip(self.arcs, self.weights):
            out = out + w * (np.mod(th - s, TWO_PI) < L)
        return float(out) if out.ndim == 0 else out

    def integrate(self, geom) -> float:
        return float(sum(w * L for (_, L), w in zip(self.arcs, self.weights)))

    def circle_breakpoints(self):
        pts = []
        for s, L in self.arcs:
            pts.append(s)
            pts.append(float(_wrap(s + L)))
        return np.unique(np.array(pts))

    def __mul__(self, c):
        return Arcs([(s, s + L) for s, L in self.arcs], self.weights * c) if isinstance(c, (int, float)) else NotImplemented

    __rmul__ = __mul__

    def __repr__(self):
        return f"Arcs({[(s, s + L) for s, L in self.arcs]}, weights={self.weights.tolist()})"


def _arc_overlap(a, b) -> float:
    """Length of the intersection of two arcs given as (start, length)."""
    total = 0.0
    for shift in (-TWO_PI, 0.0, TWO_PI):
        lo = max(a[0], b[0] + shift)
        hi = min(a[0] + a[1], b[0] + shift + b[1])
        total += max(0.0, hi - lo)
    return total


def arc_gap(a, b) -> float:
    """Smallest arc distance between two arcs given as (start, length); 0 if they meet."""
    if _arc_overlap(a, b) > 0:
        return 0.0
    ends_a = (a[0], a[0] + a[1])
    ends_b = (b[0], b[0] + b[1])
    best = math.inf
    for x in ends_a:
        for y in ends_b:
            d = abs(math.remainder(x - y, TWO_PI))
            best = min(best, d)
    return best


class Tabulated(BoundaryFunction):
    """Samples on the uniform grid theta_j = 2 pi j / N, interpolated trigonometrically."""

    def __init__(self, values):
        v = np.asarray(values, dtype=float).ravel()
        if v.size < 3:
            raise SpecValidationError("need at least 3 samples")
        self.values = v

    @property
    def grid(self) -> np.ndarray:
        return TWO_PI * np.arange(self.values.size) / self.values.size

    def to_fourier(self) -> Fourier:
        n = self.values.size
        c = np.fft.rfft(self.values) / n
        kmax = (n - 1) // 2
        a = 2.0 * c.real[1:kmax + 1]
        b = -2.0 * c.imag[1:kmax + 1]
        if n % 2 == 0:
            # Nyquist mode split evenly between cos and the (vanishing) sin part
            a = np.append(a, c.real[n // 2])
            b = np.append(b, 0.0)
        return Fourier(c.real[0], a, b)

    def __call__(self, theta):
        return self.to_fourier()(theta)

    def integrate(self, geom) -> float:
        return TWO_PI * float(np.mean(self.values))


class Band(BoundaryFunction):
    """Indicator of {xi on the sphere : lo <= xi.pole / R < hi}; ``hi = 1`` includes the pole."""
    piecewise_constant = True

    def __init__(self, lo: float = -1.0, hi: float = 1.0, pole=None, weight: float = 1.0):
        if not -1.0 <= lo < hi <= 1.0:
            raise SpecValidationError(f"bad band [{lo}, {hi})")
        self.lo = float(lo)
        self.hi = float(hi)
        self.pole = None if pole is None else np.asarray(pole, dtype=float) / np.linalg.norm(pole)
        self.weight = float(weight)

    @classmethod
    def hemisphere(cls, north: bool = True, pole=None) -> "Band":
        return cls(0.0, 1.0, pole) if north else cls(-1.0, 0.0, pole)

    def _t(self, pts):
        pts = np.asarray(pts, dtype=float)
        r = np.linalg.norm(pts, axis=-1)
        if self.pole is None:
            return pts[..., -1] / r
        return (pts @ self.pole[:pts.shape[-1]]) / r

    def __call__(self, pts):
        t = self._t(pts)
        inside = (t >= self.lo) & ((t < self.hi) | (self.hi >= 1.0))
        out = self.weight * inside.astype(float)
        return float(out) if out.ndim == 0 else out

    def integrate(self, geom) -> float:
        return self.weight * zonal_band_area(geom.d, geom.R, self.lo, self.hi)

    def zonal_breakpoints(self):
        if self.pole is not None and not np.allclose(self.pole[:-1], 0.0):
            return None
        lo, hi = (self.lo, self.hi) if self.pole is None or self.pole[-1] > 0 else (-self.hi, -self.lo)
        return np.array([lo, hi])

    def __mul__(self, c):
        return Band(self.lo, self.hi, self.pole, self.weight * c) if isinstance(c, (int, float)) else NotImplemented

    __rmul__ = __mul__


def zonal_band_area(d: int, R: float, lo: float, hi: float) -> float:
    """Surface area of {lo <= t < hi} on the sphere of radius R in R^d."""
    a = 0.5 * (d - 1)
    full = 2.0 ** (d - 2) * beta_fn(a, a)
    frac = betainc(a, a, 0.5 * (1.0 + hi)) - betainc(a, a, 0.5 * (1.0 + lo))
    return unit_sphere_area(d - 1) * R ** (d - 1) * full * frac


class Zonal(BoundaryFunction):
    """Sphere function depending only on t = xi.pole / |xi| via ``profile(t)``."""

    def __init__(self, profile: Callable, pole=None, peaked: bool = True):
        self.profile = profile
        self.pole = None if pole is None else np.asarray(pole, dtype=float) / np.linalg.norm(pole)
        self.peaked = peaked

    def _t(self, pts):
        pts = np.asarray(pts, dtype=float)
        r = np.linalg.norm(pts, axis=-1)
        p = self.pole
        if p is None:
            return pts[..., -1] / r
        return (pts @ p) / r

    def __call__(self, pts):
        out = np.asarray(self.profile(self._t(pts)), dtype=float)
        return float(out) if out.ndim == 0 else out

    def integrate(self, geom) -> float:
        return zonal_integral(geom.d, geom.R, self.profile, peaked=self.peaked)


def zonal_integral(d: int, R: float, profile: Callable, peaked: bool = True, levels: int = 40) -> float:
    """Integral over the sphere of a zonal function.

    Integrates in the polar angle with Gauss-Legendre panels graded toward
    both poles, so profiles sharply peaked at t = +-1 (Poisson kernels near
    the sphere) are resolved.
    """
    edges = graded_edges(0.0, math.pi, levels if peaked else 2, "both")
    th, w = composite_gauss_legendre(edges, 16)
    vals = np.asarray(profile(np.cos(th)), dtype=float) * np.sin(th) ** (d - 2)
    return unit_sphere_area(d - 1) * R ** (d - 1) * float(np.dot(w, vals))


class Combination(BoundaryFunction):
    def __init__(self, terms):
        self.terms = [(float(c), as_boundary_function(f)) for c, f in terms]
        self.piecewise_constant = all(f.piecewise_constant for _, f in self.terms)

    def __call__(self, pts):
        return sum(c * f(pts) for c, f in self.terms)

    def integrate(self, geom) -> float:
        return sum(c * f.integrate(geom) for c, f in self.terms)

    def circle_breakpoints(self):
        parts = [f.circle_breakpoints() for _, f in self.terms]
        if any(p is None for p in parts):
            return None
        return np.unique(np.concatenate(parts)) if parts else np.empty(0)

    def zonal_breakpoints(self):
        parts = [f.zonal_breakpoints() for _, f in self.terms]
        if any(p is None for p in parts):
            return None
        return np.unique(np.concatenate(parts)) if parts else np.empty(0)

    def __mul__(self, c):
        if not isinstance(c, (int, float)):
            return NotImplemented
        return Combination([(c * k, f) for k, f in self.terms])

    __rmul__ = __mul__


class Callable_(BoundaryFunction):
    """Arbitrary vectorized callable on boundary points."""

    def __init__(self, fn: Callable):
        self.fn = fn

    def __call__(self, pts):
        return self.fn(pts)

    def integrate(self, geom) -> float:
        if geom.boundary == "two_point":
            return float(self.fn(np.array([0.0]))[0] + self.fn(np.array([1.0]))[0])
        if geom.boundary == "circle":
            th = TWO_PI * np.arange(4096) / 4096
            return TWO_PI * float(np.mean(self.fn(th)))
        pts, w, _ = sphere_rule(geom.d, geom.R, n_polar=64)
        return float(np.dot(w, self.fn(pts)))


def simplify(f) -> BoundaryFunction:
    """Collapse combinations of Fourier/Endpoints/Constant data into one object."""
    f = as_boundary_function(f)
    if isinstance(f, Tabulated):
        return f.to_fourier()
    if not isinstance(f, Combination):
        return f
    parts = [(c, simplify(g)) for c, g in f.terms]
    kinds = {type(g) for _, g in parts} - {Constant}
    if len(kinds) == 1 and kinds <= {Fourier, Endpoints}:
        acc = None
        for c, g in parts:
            term = c * g
            acc = term if acc is None else acc + term
        if isinstance(acc, Constant):
            return acc
        if isinstance(acc, (Fourier, Endpoints)):
            return acc
    if not kinds:
        return Constant(sum(c * g.c for c, g in parts))
    return Combination(parts)
