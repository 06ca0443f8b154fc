import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fellerlab.boundary import (Arcs, Band, Constant, Endpoints, Fourier, Tabulated, arc_gap,
                                as_boundary_function, simplify, zonal_band_area)
from fellerlab.errors import SpecValidationError, UnsupportedDataError
from fellerlab.geometry import Geometry

disk = Geometry.disk()


def test_endpoints_indicator_and_integral():
    f = Endpoints.indicator(1)
    assert (f.f0, f.f1) == (0.0, 1.0)
    assert f.integrate(Geometry.interval()) == 1.0


def test_fourier_evaluation_and_integral():
    f = Fourier(0.5, a=[0.0, 2.0], b=[1.0])
    th = np.linspace(0, 2 * math.pi, 7)
    expect = 0.5 + 2.0 * np.cos(2 * th) + np.sin(th)
    np.testing.assert_allclose(f(th), expect, atol=1e-14)
    assert f.integrate(disk) == pytest.approx(math.pi)


def test_arcs_half_open_and_wrapping():
    f = Arcs([(2 * math.pi - 0.5, 0.5)])
    assert f(0.0) == 1.0
    assert f(0.5) == 0.0
    assert f(2 * math.pi - 0.5) == 1.0
    assert f.integrate(disk) == pytest.approx(1.0)


def test_arcs_must_be_disjoint():
    with pytest.raises(SpecValidationError):
        Arcs([(0.0, 1.0), (0.5, 2.0)])


def test_arc_gap():
    assert arc_gap((0.0, 1.0), (2.0, 1.0)) == pytest.approx(1.0)
    assert arc_gap((0.0, 1.0), (0.5, 1.0)) == 0.0
    assert arc_gap((0.0, 1.0), (5.0, 1.0)) == pytest.approx(2 * math.pi - 6.0)


def test_tabulated_to_fourier_reproduces_samples():
    th = 2 * math.pi * np.arange(16) / 16
    vals = 1.0 + np.cos(th) - 0.5 * np.sin(3 * th)
    f = Tabulated(vals)
    np.testing.assert_allclose(f.to_fourier()(th), vals, atol=1e-13)


def test_band_area_hemisphere_and_full():
    assert zonal_band_area(3, 1.0, -1.0, 1.0) == pytest.approx(4 * math.pi)
    assert zonal_band_area(3, 2.0, 0.0, 1.0) == pytest.approx(8 * math.pi)
    assert zonal_band_area(4, 1.0, -1.0, 1.0) == pytest.approx(2 * math.pi ** 2)
    # Archimedes: area of a band on the unit 2-sphere is 2 pi * height
    assert zonal_band_area(3, 1.0, -0.3, 0.4) == pytest.approx(2 * math.pi * 0.7)


def test_band_hemisphere_membership():
    north = Band.hemisphere()
    assert north(np.array([0.0, 0.0, 1.0])) == 1.0
    assert north(np.array([0.0, 0.0, -1.0])) == 0.0
    assert north(np.array([1.0, 0.0, 0.0])) == 1.0     # equator belongs to the northern band


def test_simplify_collapses_combinations():
    f = simplify(Fourier.cos(1) + 2.0)
    assert isinstance(f, Fourier) and f.a0 == 2.0
    g = simplify(Endpoints(1.0, 0.0) + Endpoints(0.0, 3.0))
    assert isinstance(g, Endpoints) and (g.f0, g.f1) == (1.0, 3.0)


def test_as_boundary_function():
    assert isinstance(as_boundary_function(2.0), Constant)
    with pytest.raises(UnsupportedDataError):
        as_boundary_function("nope")


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=5), st.floats(-2, 2))
def test_fourier_linear_combination(a, c):
    f = Fourier(0.0, a=a)
    g = Fourier.sin(2)
    h = simplify(f + c * g)
    th = np.linspace(0, 6, 11)
    np.testing.assert_allclose(h(th), f(th) + c * g(th), atol=1e-12)
