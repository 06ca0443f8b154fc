import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from fellerlab import spectral
from fellerlab.boundary import Constant, Endpoints
from fellerlab.errors import NotExcessiveError, NumericalInconsistencyError, SpecValidationError
from fellerlab.geometry import Geometry
from fellerlab.spectral import (AbsorbedSemigroup, ExcessiveFunction, alpha_feller, alpha_feller_closed_form_interval,
                                alpha_poisson_interval, apply_absorbed_semigroup, energy_functional_t,
                                feller_measure_limit, image_kernel, supplementary_feller)

iv = Geometry.interval()
sg = AbsorbedSemigroup(iv)
e0, e1 = Endpoints.indicator(0), Endpoints.indicator(1)


# --- independent oracles ------------------------------------------------------------

def shooting_poisson(alpha, x):
    """Solve alpha u - u''/2 = 0, u(0) = 1, u(1) = 0 by shooting on u'(0)."""
    def end(s):
        sol = solve_ivp(lambda t, y: [y[1], 2 * alpha * y[0]], (0, 1), [1.0, s], rtol=1e-12, atol=1e-13)
        return sol.y[0, -1]
    s = brentq(end, -50, 0)
    sol = solve_ivp(lambda t, y: [y[1], 2 * alpha * y[0]], (0, 1), [1.0, s], rtol=1e-12, atol=1e-13,
                    dense_output=True)
    return sol.sol(x)[0]


def quad_u_alpha(alpha):
    b = math.sqrt(2 * alpha)
    val, _ = quad(lambda x: math.sinh(b * (1 - x)) / math.sinh(b) * x, 0, 1, epsabs=1e-14)
    return alpha * val


def random_walk_survival(t, x, n=100):
    """P(walk on {0, 1/n, ..., 1} started at x is not absorbed by time t), exact dynamic programming."""
    h = 1.0 / n
    steps = int(round(t / h ** 2))
    p = np.zeros(n + 1)
    p[int(round(x * n))] = 1.0
    for _ in range(steps):
        q = np.zeros_like(p)
        q[1:-1] = 0.5 * (p[:-2] + p[2:])
        p = q
    return p.sum()


# --- alpha Poisson kernel ----------------------------------------------------------------

def test_alpha_poisson_examples():
    assert alpha_poisson_interval(0.0, 0.25, 0) == pytest.approx(0.75)
    v = alpha_poisson_interval(2.0, 0.5, 0)
    assert v == pytest.approx(math.sinh(1) / math.sinh(2), rel=1e-14)
    assert v == pytest.approx(0.324027, abs=1e-6)
    assert v == pytest.approx(shooting_poisson(2.0, 0.5), rel=1e-8)


@given(st.floats(0.0, 1e4), st.floats(1e-3, 1 - 1e-3))
def test_alpha_poisson_reflection_symmetry(alpha, x):
    assert alpha_poisson_interval(alpha, x, 0) == pytest.approx(alpha_poisson_interval(alpha, 1 - x, 1),
                                                                rel=1e-12, abs=1e-300)


# --- alpha-order Feller measure ---------------------------------------------------------

@pytest.mark.parametrize("alpha,frozen", [(2.0, 0.224279), (8.0, 0.426713)])
def test_alpha_feller_examples(alpha, frozen):
    u = alpha_feller(iv, alpha, e0, e1)
    assert u == pytest.approx(frozen, abs=1e-6)
    assert u == pytest.approx(quad_u_alpha(alpha), rel=1e-10)
    assert u == pytest.approx(alpha_feller_closed_form_interval(alpha)["01"], rel=1e-12)


def test_alpha_feller_zero_data():
    assert alpha_feller(iv, 3.0, 0.0, 0.0) == 0.0
    assert alpha_feller(iv, 3.0, e0, 0.0) == 0.0


def test_alpha_feller_total_and_offdiagonal():
    assert alpha_feller(iv, 2.0, 1.0, 1.0) == pytest.approx(alpha_feller_closed_form_interval(2.0)["11total"])
    a = 1e4
    off = alpha_feller(iv, a, e0, e1) + alpha_feller(iv, a, e1, e0)
    assert off == pytest.approx(1.0, abs=1e-6)


@given(st.floats(0.01, 1e3), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_alpha_feller_symmetric(alpha, a, b, c, d):
    f, g = Endpoints(a, b), Endpoints(c, d)
    assert alpha_feller(iv, alpha, f, g) == pytest.approx(alpha_feller(iv, alpha, g, f), rel=1e-9, abs=1e-12)


@given(st.floats(0.01, 1e3), st.floats(1.01, 4.0))
def test_alpha_feller_nondecreasing(alpha, factor):
    assert alpha_feller(iv, alpha * factor, e0, e1) >= alpha_feller(iv, alpha, e0, e1) - 1e-12


# --- limit and certificate ---------------------------------------------------------------

def test_feller_limit_interval():
    lim = feller_measure_limit(iv, e0, e1, [2.0 ** k for k in range(15)])
    assert lim.value == pytest.approx(0.5, abs=1e-9)
    assert lim.max_violation <= 1e-9
    assert np.all(np.diff(lim.iterates) >= -1e-12)


def test_feller_limit_rejects_bad_schedule():
    with pytest.raises(SpecValidationError):
        feller_measure_limit(iv, e0, e1, [1.0, 2.0])
    with pytest.raises(SpecValidationError):
        feller_measure_limit(iv, e0, e1, [1.0, 4.0, 2.0])


def test_feller_limit_flags_non_monotone(monkeypatch):
    monkeypatch.setattr(spectral, "alpha_feller", lambda g, a, f, h: 1.0 / a)
    with pytest.raises(NumericalInconsistencyError):
        feller_measure_limit(iv, e0, e1, [1.0, 2.0, 4.0])


# --- semigroup -------------------------------------------------------------------------------

def test_semigroup_eigenfunction():
    coef = np.zeros(4)
    coef[0] = 1.0
    x = np.linspace(0.05, 0.95, 7)
    for t in (0.01, 0.3):
        got = apply_absorbed_semigroup(sg, t, coef)(x)
        np.testing.assert_allclose(got, math.exp(-math.pi ** 2 * t / 2) * math.sqrt(2) * np.sin(math.pi * x),
                                   rtol=1e-12)


def test_semigroup_constant_small_time_tends_to_one():
    x = np.array([0.2, 0.5, 0.7])
    vals = [apply_absorbed_semigroup(sg, t, lambda y: np.ones_like(y))(x) for t in (1e-2, 1e-3, 1e-4)]
    assert np.all(np.abs(vals[-1] - 1.0) < 1e-10)
    assert np.all(vals[0] <= vals[1] + 1e-12)


def test_semigroup_against_random_walk():
    got = float(apply_absorbed_semigroup(sg, 0.5, lambda y: np.ones_like(y))(np.array([0.5]))[0])
    assert got == pytest.approx(random_walk_survival(0.5, 0.5), abs=2e-4)


@given(st.floats(1e-5, 2.0), st.floats(0.01, 0.99))
def test_semigroup_contraction(t, x):
    v = apply_absorbed_semigroup(sg, t, lambda y: np.cos(7 * y))(np.array([x]))
    assert abs(float(v[0])) <= 1.0 + 1e-9


def test_image_kernel_matches_series():
    x, y = 0.3, 0.6
    for t in (2e-3, 5e-3, 0.1):
        assert image_kernel(t, x, y) == pytest.approx(sg.kernel(t, x, y), rel=1e-9)


def test_semigroup_rejects_nonpositive_time():
    with pytest.raises(ValueError):
        apply_absorbed_semigroup(sg, 0.0, lambda y: y)


def test_truncation_doubling_changes_little():
    big = AbsorbedSemigroup(iv, 1024)
    for t in (0.002, 0.05, 0.4):
        a = energy_functional_t(sg, e0, e1, t)
        b = energy_functional_t(big, e0, e1, t)
        assert abs(a - b) < 1e-8


# --- energy functional ---------------------------------------------------------------------

def test_energy_functional_zero_v():
    q = ExcessiveFunction.escape(iv)
    assert energy_functional_t(sg, e0, q, 0.1) == 0.0


def test_energy_functional_constant_series_oracle():
    k = np.arange(1, 200001)
    ck = math.sqrt(2) * (1 - np.cos(k * math.pi)) / (k * math.pi)
    for t in (0.4, 0.1, 0.01):
        ref = (1.0 - np.sum(ck ** 2 * np.exp(-0.5 * (k * math.pi) ** 2 * t))) / t
        got = energy_functional_t(sg, 1.0, 1.0, t)
        assert got > 0
        assert got == pytest.approx(ref, rel=1e-6)


def test_energy_functional_monotone_grid():
    vals = [energy_functional_t(sg, e0, e1, t) for t in (0.4, 0.2, 0.1, 0.05)]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
    vals = [energy_functional_t(sg, Endpoints(1.0, 2.0), 1.0, t) for t in (0.4, 0.2, 0.1, 0.05)]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_t_limit_agrees_with_alpha_limit():
    t_lim = energy_functional_t(sg, e0, e1, 1e-2)
    a_lim = feller_measure_limit(iv, e0, e1, [2.0 ** k for k in range(15)]).value
    assert abs(t_lim - a_lim) < 1e-6


def test_signed_data_is_rejected():
    with pytest.raises(NotExcessiveError):
        ExcessiveFunction.harmonic(iv, Endpoints(-1.0, 1.0))
    with pytest.raises(NotExcessiveError):
        ExcessiveFunction.closed_form(iv, lambda x: np.sin(2 * math.pi * np.asarray(x)))
    with pytest.raises(NotExcessiveError):
        # nonnegative but p_t u > u somewhere: not excessive
        ExcessiveFunction.closed_form(iv, lambda x: (np.abs(np.asarray(x) - 0.5) < 0.2).astype(float) + 0.1)


def test_closed_form_excessive_accepted():
    u = ExcessiveFunction.closed_form(iv, lambda x: np.asarray(x) * (1 - np.asarray(x)))
    assert energy_functional_t(sg, u, 1.0, 0.1) > 0


# --- supplementary Feller measure -----------------------------------------------------------

@pytest.mark.parametrize("geom", [Geometry.interval(), Geometry.disk()])
def test_supplementary_vanishes_bounded(geom):
    for a in (0.5, 10.0):
        assert supplementary_feller(geom, a, Constant(1.0)) == 0.0


def test_supplementary_exterior_alpha_independent():
    ext = Geometry.ball_exterior(3, 1.0)
    a = supplementary_feller(ext, 1.5, Constant(1.0))
    b = supplementary_feller(ext, 3.0, Constant(1.0))
    assert a == pytest.approx(b, rel=1e-9)
    assert a == pytest.approx(2 * math.pi, rel=1e-9)
    assert supplementary_feller(Geometry.ball_exterior(3, 2.0), 1.0, 1.0) == pytest.approx(4 * math.pi, rel=1e-9)
