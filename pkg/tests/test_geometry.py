import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import dblquad

from fellerlab.boundary import Band, Constant, Endpoints, Zonal
from fellerlab.errors import (BoundaryPointError, DiagonalSingularityError, SpecValidationError,
                              UnsupportedDimensionError)
from fellerlab.geometry import (Geometry, arc_pair_feller, boundary_measure_integrate, douglas_kernel_circle,
                                escape_probability, feller_kernel_sphere, poisson_kernel_ball, poisson_profile,
                                sphere_area)

angles = st.floats(0.0, 2 * math.pi, allow_nan=False)


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def random_rotation(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)))
    return q * np.sign(np.diag(r))


# --- sphere constants -------------------------------------------------------

def test_sphere_area_closed_forms():
    assert sphere_area(2) == pytest.approx(2 * math.pi, rel=1e-15)
    assert sphere_area(3) == pytest.approx(4 * math.pi, rel=1e-15)
    assert sphere_area(4) == pytest.approx(2 * math.pi ** 2, rel=1e-15)


# --- geometry type ------------------------------------------------------------

def test_geometry_invariants():
    iv = Geometry.interval()
    assert iv.boundary_mass == 2 and iv.volume_mass == 1
    disk = Geometry.disk()
    assert disk.boundary_mass == pytest.approx(2 * math.pi)
    assert disk.volume_mass == pytest.approx(math.pi)
    assert Geometry.ball_exterior(3, 1.0).volume_mass == math.inf
    with pytest.raises(UnsupportedDimensionError):
        Geometry.ball_exterior(2, 1.0)
    with pytest.raises(SpecValidationError):
        Geometry.ball_interior(3, -1.0)


# --- circle kernel ------------------------------------------------------------

def test_douglas_kernel_examples():
    assert douglas_kernel_circle(0.0, math.pi) == pytest.approx(1 / (8 * math.pi), rel=1e-14)
    assert douglas_kernel_circle(0.0, math.pi / 2) == pytest.approx(1 / (4 * math.pi), rel=1e-14)


def test_douglas_kernel_diagonal_raises():
    with pytest.raises(DiagonalSingularityError):
        douglas_kernel_circle(1.0, 1.0)
    with pytest.raises(DiagonalSingularityError):
        douglas_kernel_circle(0.0, 2 * math.pi)


@given(angles, angles, angles)
def test_douglas_kernel_symmetric_rotation_invariant(a, b, c):
    if abs(math.sin(0.5 * (a - b))) < 1e-3:
        return
    k = douglas_kernel_circle(a, b)
    assert k > 0
    assert douglas_kernel_circle(b, a) == pytest.approx(k, rel=1e-12)
    assert douglas_kernel_circle(a + c, b + c) == pytest.approx(k, rel=1e-9)


# --- sphere kernel ------------------------------------------------------------

def test_feller_kernel_sphere_examples():
    n = np.array([0.0, 0.0, 1.0])
    assert feller_kernel_sphere(3, 1.0, n, -n) == pytest.approx(1 / (16 * math.pi), rel=1e-14)
    eta = np.array([math.sqrt(3) / 2, 0.0, 0.5])      # |n - eta| = 1
    assert feller_kernel_sphere(3, 1.0, n, eta) == pytest.approx(1 / (2 * math.pi), rel=1e-12)
    assert feller_kernel_sphere(3, 1.0, n, eta, side="exterior") == pytest.approx(1 / (4 * math.pi), rel=1e-12)


def test_feller_kernel_sphere_errors():
    n = np.array([0.0, 0.0, 1.0])
    with pytest.raises(DiagonalSingularityError):
        feller_kernel_sphere(3, 1.0, n, n)
    with pytest.raises(UnsupportedDimensionError):
        feller_kernel_sphere(2, 1.0, n[:2], -n[:2])


@given(st.integers(3, 5), st.floats(0.3, 3.0), st.integers(0, 2 ** 31))
def test_feller_kernel_sphere_symmetry_rotation(d, R, seed):
    rng = np.random.default_rng(seed)
    xi = R * unit(rng.normal(size=d))
    eta = R * unit(rng.normal(size=d))
    if np.linalg.norm(xi - eta) < 1e-3 * R:
        return
    k = feller_kernel_sphere(d, R, xi, eta)
    Q = random_rotation(rng, d)
    assert feller_kernel_sphere(d, R, eta, xi) == pytest.approx(k, rel=1e-12)
    assert feller_kernel_sphere(d, R, Q @ xi, Q @ eta) == pytest.approx(k, rel=1e-9)


# --- Poisson kernel -------------------------------------------------------------

def test_poisson_kernel_at_centre():
    eta = np.array([0.0, 1.0, 0.0])
    assert poisson_kernel_ball(3, 1.0, np.zeros(3), eta) == pytest.approx(1 / (4 * math.pi), rel=1e-14)


def test_poisson_kernel_boundary_point_raises():
    with pytest.raises(BoundaryPointError):
        poisson_kernel_ball(3, 1.0, np.array([1.0, 0, 0]), np.array([0, 1.0, 0]))


def _mass(d, R, x):
    r = float(np.linalg.norm(x))
    return Zonal(poisson_profile(d, R, r), pole=x).integrate(Geometry.ball_interior(d, R))


@pytest.mark.parametrize("d", [3, 4, 5])
def test_poisson_mass_interior_and_exterior(d):
    rng = np.random.default_rng(d)
    for _ in range(5):
        direction = unit(rng.normal(size=d))
        assert _mass(d, 1.0, rng.uniform(0, 0.97) * direction) == pytest.approx(1.0, abs=1e-8)
        r = rng.uniform(1.03, 5.0)
        x = r * direction
        ext = Geometry.ball_exterior(d, 1.0)
        assert _mass(d, 1.0, x) == pytest.approx(r ** (2 - d), abs=1e-8)
        assert _mass(d, 1.0, x) + escape_probability(ext, x) == pytest.approx(1.0, abs=1e-8)


def test_poisson_mass_exterior_example():
    assert _mass(3, 1.0, np.array([0.0, 0.0, 2.0])) == pytest.approx(0.5, abs=1e-8)


def test_poisson_profile_matches_kernel():
    rng = np.random.default_rng(0)
    x = np.array([0.1, -0.3, 0.4])
    eta = unit(rng.normal(size=3)) * 1.0
    t = float(eta @ unit(x))
    assert poisson_profile(3, 1.0, np.linalg.norm(x))(t) == pytest.approx(poisson_kernel_ball(3, 1.0, x, eta),
                                                                            rel=1e-12)


# --- escape probability -----------------------------------------------------------

def test_escape_probability_examples():
    assert escape_probability(Geometry.interval(), 0.3) == 0.0
    assert escape_probability(Geometry.disk(), np.array([0.2, 0.1])) == 0.0
    assert escape_probability(Geometry.ball_interior(3, 1.0), np.zeros(3)) == 0.0
    ext = Geometry.ball_exterior(3, 1.0)
    assert escape_probability(ext, np.array([0.0, 2.0, 0.0])) == pytest.approx(0.5)
    assert escape_probability(ext, np.array([0.0, 0.0, 1.0 + 1e-12])) == pytest.approx(0.0, abs=1e-11)


# --- boundary measure -----------------------------------------------------------------

def test_boundary_measure_integrate():
    assert boundary_measure_integrate(Geometry.disk(), Constant(1.0)) == pytest.approx(2 * math.pi)
    assert boundary_measure_integrate(Geometry.interval(), Endpoints.indicator(0)) == 1.0
    assert boundary_measure_integrate(Geometry.ball_exterior(3, 1.0), 1.0) == pytest.approx(4 * math.pi)
    assert boundary_measure_integrate(Geometry.ball_exterior(3, 1.0), Band.hemisphere()) == pytest.approx(2 * math.pi)


# --- arc-pair closed form against adaptive quadrature -----------------------------------

@pytest.mark.parametrize("a,b", [
    ((0.0, math.pi / 2), (math.pi, math.pi / 2)),
    ((0.0, math.pi / 4), (math.pi / 2, math.pi / 4)),
    ((1.0, 0.7), (3.5, 1.9)),
    ((5.5, 1.2), (1.0, 2.0)),          # A wraps through 0
])
def test_arc_pair_feller_against_dblquad(a, b):
    def k(y, x):
        return 1.0 / (8 * math.pi * math.sin(0.5 * (x - y)) ** 2)
    ref, _ = dblquad(k, a[0], a[0] + a[1], lambda x: b[0], lambda x: b[0] + b[1], epsabs=1e-13, epsrel=1e-12)
    assert arc_pair_feller(a, b) == pytest.approx(ref, rel=1e-9)


def test_arc_pair_feller_frozen_value():
    assert arc_pair_feller((0.0, math.pi / 2), (math.pi, math.pi / 2)) == pytest.approx(math.log(2) / (2 * math.pi),
                                                                                    rel=1e-14)


def test_arc_pair_feller_overlap_and_touching():
    with pytest.raises(DiagonalSingularityError):
        arc_pair_feller((0.0, 1.0), (0.5, 1.0))
    assert arc_pair_feller((0.0, 1.0), (1.0, 1.0)) == math.inf
