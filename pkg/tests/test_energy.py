import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import dblquad

from fellerlab.boundary import Arcs, Band, Constant, Endpoints, Fourier, Tabulated, Zonal
from fellerlab.energy import (dirichlet_energy, douglas_circle, douglas_integral, energy_identity_residual,
                              energy_identity_sides, energy_vs_douglas, harmonic_extension)
from fellerlab.errors import BoundaryPointError, HypothesisViolationError
from fellerlab.geometry import Geometry

disk = Geometry.disk()
iv = Geometry.interval()


# --- independent oracles --------------------------------------------------------------

def polar_energy(n):
    """1/2 int over the disk of |grad(r^n cos n theta)|^2 = n^2 r^(2n-2), in polar coordinates."""
    from scipy.integrate import quad
    radial, _ = quad(lambda r: n * n * r ** (2 * n - 2) * r, 0, 1)
    return 0.5 * radial * 2 * math.pi


def smooth_douglas(f):
    """Douglas integral after the change of variables psi = xi - eta, by scipy dblquad."""
    def g(psi, eta):
        if psi == 0.0:
            return 0.0
        return (f(eta + psi) - f(eta)) ** 2 / (8 * math.pi * math.sin(0.5 * psi) ** 2)
    val, _ = dblquad(g, 0, 2 * math.pi, lambda e: 0.0, lambda e: 2 * math.pi, epsabs=1e-11, epsrel=1e-11)
    return 0.5 * val


# --- harmonic extension ------------------------------------------------------------------

def test_harmonic_extension_examples():
    r, th = 0.6, 1.1
    assert harmonic_extension(disk, Fourier.cos(1), np.array([r * math.cos(th), r * math.sin(th)])) == \
        pytest.approx(r * math.cos(th), rel=1e-13)
    assert harmonic_extension(iv, Endpoints(0.0, 1.0), 0.3) == pytest.approx(0.3)
    ext = Geometry.ball_exterior(3, 1.0)
    assert harmonic_extension(ext, Constant(1.0), np.array([0.0, 0.0, 2.0])) == pytest.approx(0.5)


def test_harmonic_extension_of_arc_and_ball_data():
    # harmonic measure of a half circle seen from the centre is 1/2
    assert harmonic_extension(disk, Arcs([(0.0, math.pi)]), np.zeros(2)) == pytest.approx(0.5, abs=1e-12)
    ball = Geometry.ball_interior(3, 1.0)
    f = Zonal(lambda t: np.asarray(t), pole=np.array([0.0, 0.0, 1.0]), peaked=False)
    x = np.array([0.1, 0.2, 0.3])
    assert harmonic_extension(ball, f, x) == pytest.approx(0.3, abs=1e-8)


def test_harmonic_extension_rejects_boundary_point():
    with pytest.raises(BoundaryPointError):
        harmonic_extension(iv, Endpoints(0.0, 1.0), 1.0)
    with pytest.raises(BoundaryPointError):
        harmonic_extension(disk, Fourier.cos(1), np.array([1.0, 0.0]))


# --- Dirichlet energy --------------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_dirichlet_energy_modes(n):
    assert dirichlet_energy(disk, Fourier.cos(n)) == pytest.approx(polar_energy(n), rel=1e-12)
    assert dirichlet_energy(disk, Fourier.cos(n)) == pytest.approx(n * math.pi / 2, rel=1e-14)


def test_dirichlet_energy_constant_zero():
    for g in (disk, iv, Geometry.ball_interior(3, 1.0)):
        assert dirichlet_energy(g, Constant(2.5)) == 0.0


def test_dirichlet_energy_indicators_infinite():
    assert dirichlet_energy(disk, Arcs([(0.0, math.pi)])) == math.inf
    assert dirichlet_energy(Geometry.ball_interior(3, 1.0), Band.hemisphere()) == math.inf


# --- Douglas integral ----------------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_douglas_modes(n):
    assert douglas_integral(disk, Fourier.cos(n)) == pytest.approx(n * math.pi / 2, rel=1e-8)


def test_douglas_against_scipy_oracle():
    f = Fourier(0.0, a=[1.0, 0.0, 0.5], b=[0.0, -0.7])
    assert douglas_integral(disk, f) == pytest.approx(smooth_douglas(f), rel=1e-7)


def test_douglas_interval():
    assert douglas_integral(iv, Endpoints(0.0, 1.0)) == pytest.approx(0.5, abs=1e-9)
    assert douglas_integral(iv, Endpoints(2.0, -1.0)) == pytest.approx(4.5, abs=1e-8)


def test_douglas_indicator_divergent():
    res = douglas_circle(Arcs([(0.0, math.pi)]))
    assert res.divergent and res.value == math.inf
    rep = energy_vs_douglas(disk, Arcs([(0.0, math.pi)]))
    assert rep.divergent and not rep.passed


def test_douglas_tabulated_matches_fourier():
    th = 2 * math.pi * np.arange(32) / 32
    f = Tabulated(np.cos(2 * th) + 0.3 * np.sin(th))
    assert douglas_integral(disk, f) == pytest.approx(math.pi + 0.09 * math.pi / 2, rel=1e-7)


@given(st.lists(st.floats(-2, 2), min_size=1, max_size=4), st.floats(-5, 5))
def test_douglas_shift_invariance(a, c):
    f = Fourier(0.0, a=a)
    base = douglas_integral(disk, f)
    assert douglas_integral(disk, f + c) == pytest.approx(base, rel=1e-12, abs=1e-14)


@given(st.lists(st.floats(-2, 2), min_size=1, max_size=4), st.floats(-4, 4))
def test_douglas_scaling(a, c):
    f = Fourier(0.0, a=a)
    assert douglas_integral(disk, c * f) == pytest.approx(c * c * douglas_integral(disk, f), rel=1e-10, abs=1e-14)


@given(st.lists(st.floats(-2, 2), min_size=2, max_size=2), st.lists(st.floats(-2, 2), min_size=2, max_size=2))
def test_polarized_douglas_symmetric_bilinear(a, b):
    f = Fourier(0.0, a=a)
    g = Fourier(0.0, b=b)

    def form(u, v):
        return 0.25 * (douglas_integral(disk, u + v) - douglas_integral(disk, u - v))
    assert form(f, g) == pytest.approx(form(g, f), abs=1e-10)
    assert form(f, 2.0 * g) == pytest.approx(2 * form(f, g), abs=1e-9)
    assert form(f, f) == pytest.approx(douglas_integral(disk, f), rel=1e-9, abs=1e-12)


@given(st.lists(st.floats(-2, 2), min_size=1, max_size=5), st.lists(st.floats(-2, 2), max_size=5))
def test_energy_equals_douglas_on_disk(a, b):
    f = Fourier(0.0, a=a, b=b)
    e = dirichlet_energy(disk, f)
    d = douglas_integral(disk, f)
    assert abs(e - d) / max(d, 1e-12) < 1e-5 or abs(e - d) < 1e-12


def test_pair_energy_includes_escape_term():
    """Outside the sphere H1 < 1: the energy is the Douglas form plus the escape part v0 * int f^2."""
    f = Zonal(lambda t: np.asarray(t), pole=np.array([0.0, 0.0, 1.0]), peaked=False)
    pair = Geometry.sphere_pair(3, 1.0)
    assert dirichlet_energy(pair, f) == pytest.approx(2 * math.pi, rel=1e-10)
    assert douglas_integral(pair, f) == pytest.approx(4 * math.pi / 3, rel=1e-6)
    v0 = 0.5
    assert dirichlet_energy(pair, f) == pytest.approx(douglas_integral(pair, f) + v0 * 4 * math.pi / 3, rel=1e-6)
    for d in (3, 4):
        g = Geometry.ball_interior(d, 1.0)
        h = Zonal(lambda t: np.asarray(t), pole=np.eye(d)[-1], peaked=False)
        assert dirichlet_energy(g, h) == pytest.approx(douglas_integral(g, h), rel=1e-6)


# --- energy_vs_douglas ----------------------------------------------------------------------

def test_energy_vs_douglas_disk_mode():
    rep = energy_vs_douglas(disk, Fourier.cos(2))
    assert rep.passed
    assert rep.dirichlet_energy == pytest.approx(math.pi)
    assert rep.douglas_value == pytest.approx(math.pi, rel=1e-6)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_energy_vs_douglas_interval(a, b):
    rep = energy_vs_douglas(iv, Endpoints(a, b))
    assert rep.dirichlet_energy == pytest.approx((b - a) ** 2 / 2)
    assert rep.douglas_value == pytest.approx((b - a) ** 2 / 2, rel=1e-8, abs=1e-12)


@pytest.mark.parametrize("geom", [Geometry.ball_exterior(3, 1.0), Geometry.sphere_pair(3, 1.0)])
def test_energy_vs_douglas_rejects_infinite_volume(geom):
    with pytest.raises(HypothesisViolationError):
        energy_vs_douglas(geom, Constant(1.0))


# --- finite-alpha energy identity -------------------------------------------------------------

def test_energy_identity_constant():
    assert energy_identity_residual(iv, 2.0, Constant(3.0)) < 1e-14


@pytest.mark.parametrize("alpha", [1.0, 2.0, 8.0])
def test_energy_identity_endpoint_data(alpha):
    assert energy_identity_residual(iv, alpha, Endpoints(0.0, 1.0)) < 1e-8


def test_energy_identity_rhs_value():
    lhs, rhs = energy_identity_sides(2.0, Endpoints(0.0, 1.0))
    assert rhs == pytest.approx(2 * 0.2242794352, rel=1e-9)


def test_energy_identity_residual_shrinks_with_refinement():
    res = [energy_identity_residual(iv, 8.0, Endpoints(0.0, 1.0), panels=p, nodes=2) for p in (1, 2, 4, 8)]
    assert all(b < a for a, b in zip(res, res[1:]))
