"""Model domains with their boundary/volume measures and closed-form kernels.

Conventions
-----------
* Interval: boundary points are the floats 0.0 and 1.0, interior points floats.
* Disk: boundary points are angles in radians, interior points ``(..., 2)`` arrays.
* Balls: all points are ``(..., d)`` arrays; boundary points have norm ``R``.

The circle carries arclength and the kernel ``1/(4 pi (1 - cos))``; the sphere
carries surface measure and the kernel ``(2/Omega_d) |xi - eta|^-d``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (BoundaryPointError, DiagonalSingularityError, SpecValidationError,
                     UnsupportedDimensionError)
from .quadrature import unit_sphere_area

KINDS = ("interval", "disk", "ball_interior", "ball_exterior", "sphere_pair")


@dataclass(frozen=True)
class Geometry:
    kind: str
    d: int
    R: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecValidationError(f"unknown geometry kind {self.kind!r}")
        if self.R <= 0:
            raise SpecValidationError("radius must be positive")
        if self.kind == "interval" and (self.d != 1 or self.R != 1.0):
            raise SpecValidationError("the interval is fixed to (0, 1)")
        if self.kind == "disk" and (self.d != 2 or self.R != 1.0):
            raise SpecValidationError("the disk is the unit disk")
        if self.kind == "ball_interior" and self.d < 2:
            raise UnsupportedDimensionError("ball interior needs d >= 2")
        if self.kind in ("ball_exterior", "sphere_pair") and self.d < 3:
            raise UnsupportedDimensionError(
                f"{self.kind} needs d >= 3 (transient exterior)")

    @classmethod
    def interval(cls) -> "Geometry":
        return cls("interval", 1, 1.0)

    @classmethod
    def disk(cls) -> "Geometry":
        return cls("disk", 2, 1.0)

    @classmethod
    def ball_interior(cls, d: int, R: float = 1.0) -> "Geometry":
        return cls("ball_interior", d, float(R))

    @classmethod
    def ball_exterior(cls, d: int = 3, R: float = 1.0) -> "Geometry":
        return cls("ball_exterior", d, float(R))

    @classmethod
    def sphere_pair(cls, d: int = 3, R: float = 1.0) -> "Geometry":
        return cls("sphere_pair", d, float(R))

    @property
    def boundary(self) -> str:
        """Boundary family: 'two_point', 'circle' or 'sphere'."""
        if self.kind == "interval":
            return "two_point"
        if self.d == 2:
            return "circle"
        return "sphere"

    @property
    def boundary_mass(self) -> float:
        """mu(F)."""
        if self.kind == "interval":
            return 2.0
        return unit_sphere_area(self.d) * self.R ** (self.d - 1)

    @property
    def volume_mass(self) -> float:
        """m(G); infinite for unbounded domains."""
        if self.kind == "interval":
            return 1.0
        if self.kind == "ball_interior" or self.kind == "disk":
            return unit_sphere_area(self.d) * self.R ** self.d / self.d
        return math.inf

    @property
    def recurrent(self) -> bool:
        return self.kind in ("interval", "disk", "ball_interior")


def sphere_area(d: int) -> float:
    """Omega_d = 2 pi^(d/2) / Gamma(d/2), the area of the unit sphere in R^d."""
    return unit_sphere_area(d)


def douglas_kernel_circle(theta_xi, theta_eta):
    """1 / (4 pi (1 - cos(theta_xi - theta_eta))) on the unit circle."""
    diff = np.asarray(theta_xi, dtype=float) - np.asarray(theta_eta, dtype=float)
    wrapped = np.mod(diff, 2.0 * math.pi)
    h = np.sin(0.5 * diff)
    s2 = h * h
    if np.any(np.minimum(wrapped, 2.0 * math.pi - wrapped) <= 1e-14 * np.maximum(1.0, np.abs(diff))):
        raise DiagonalSingularityError("circle kernel evaluated on the diagonal")
    out = 1.0 / (8.0 * math.pi * s2)
    return float(out) if out.ndim == 0 else out


def _circle_potential(psi: float) -> float:
    return -math.log(abs(math.sin(0.5 * psi))) / (2.0 * math.pi)


def arc_pair_feller(a, b) -> float:
    """int_A int_B of the circle kernel for arcs given as (start, length).

    The kernel is the second difference of -(1/2 pi) log|sin(psi/2)|, so the
    double integral over disjoint arcs reduces to four evaluations.
    """
    a0, la = float(a[0]), float(a[1])
    b0, lb = float(b[0]), float(b[1])
    if not (0 < la and 0 < lb and la + lb <= 2 * math.pi):
        raise ValueError("arc lengths must be positive with total at most 2 pi")
    # put B after A going counterclockwise
    shift = (b0 - a0) % (2 * math.pi)
    if shift < la or shift + lb > 2 * math.pi:
        raise DiagonalSingularityError("arcs overlap: the kernel is not integrable there")
    if shift == la or shift + lb == 2 * math.pi:
        return math.inf
    a1 = la
    b0, b1 = shift, shift + lb
    phi = _circle_potential
    return phi(b1) - phi(b0) - phi(b1 - a1) + phi(b0 - a1)


def feller_kernel_sphere(d: int, R: float, xi, eta, side: str = "pair"):
    """Feller kernel of the sphere |x| = R in R^d.

    ``side='pair'`` is the kernel for G = R^d minus the sphere,
    (2/Omega_d)|xi - eta|^-d.  Excursions into one component only
    (``'interior'`` or ``'exterior'``) carry half of it each.
    """
    if d < 3:
        raise UnsupportedDimensionError("sphere Feller kernel needs d >= 3")
    factor = {"pair": 2.0, "interior": 1.0, "exterior": 1.0}[side]
    diff = np.asarray(xi, dtype=float) - np.asarray(eta, dtype=float)
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    if np.any(dist == 0.0):
        raise DiagonalSingularityError("sphere kernel evaluated on the diagonal")
    out = factor / unit_sphere_area(d) * dist ** (-d)
    return float(out) if np.ndim(out) == 0 else out


def poisson_kernel_ball(d: int, R: float, x, eta):
    """Hitting density of the sphere |x| = R from x, w.r.t. surface measure."""
    x = np.asarray(x, dtype=float)
    eta = np.asarray(eta, dtype=float)
    r2 = float(np.sum(x * x))
    if abs(math.sqrt(r2) - R) <= 1e-14 * R:
        raise BoundaryPointError("Poisson kernel needs |x| != R")
    diff = x - eta
    dist2 = np.sum(diff * diff, axis=-1)
    out = abs(R * R - r2) / (unit_sphere_area(d) * R) * dist2 ** (-0.5 * d)
    return float(out) if np.ndim(out) == 0 else out


def poisson_profile(d: int, R: float, r: float):
    """Poisson kernel at |x| = r as a function of t = cos(angle(x, eta))."""
    c = abs(R * R - r * r) / (unit_sphere_area(d) * R)

    def profile(t):
        return c * (R * R + r * r - 2.0 * r * R * np.asarray(t)) ** (-0.5 * d)
    return profile


def _norm(geom: Geometry, x) -> float:
    if geom.kind == "interval":
        return float(x)
    return float(np.linalg.norm(np.asarray(x, dtype=float)))


def escape_probability(geom: Geometry, x) -> float:
    """q(x) = P^x(never hitting F)."""
    if geom.kind in ("ball_exterior", "sphere_pair"):
        r = _norm(geom, x)
        if r <= geom.R:
            return 0.0
        return 1.0 - (geom.R / r) ** (geom.d - 2)
    return 0.0


def check_interior(geom: Geometry, x) -> None:
    """Raise BoundaryPointError unless x lies in G."""
    if geom.kind == "interval":
        if not 0.0 < float(x) < 1.0:
            raise BoundaryPointError(f"{x} is not in (0, 1)")
        return
    r = _norm(geom, x)
    if geom.kind == "sphere_pair":
        ok = r != geom.R
    elif geom.kind == "ball_exterior":
        ok = r > geom.R
    else:
        ok = r < geom.R
    if not ok:
        raise BoundaryPointError(f"point with |x| = {r} is not in G for {geom.kind}")


def boundary_measure_integrate(geom: Geometry, f) -> float:
    """Integral of a BoundaryFunction over F against mu."""
    from .boundary import as_boundary_function
    return as_boundary_function(f).integrate(geom)
