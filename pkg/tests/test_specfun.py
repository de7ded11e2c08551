import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sci_integrate

from leaky.specfun import (X_SWITCH, QuadratureError, QuadratureSpec, SeriesError, _j1_hankel, _j1_series,
                           bessel_j1, bessel_series, integrate, profile_transform)

mpmath.mp.dps = 30


def j1_reference(x):
    return float(mpmath.besselj(1, x))


def test_j1_zero_and_odd():
    assert bessel_j1(0.0) == 0.0
    xs = np.linspace(0.1, 50, 37)
    assert np.array_equal(bessel_j1(-xs), -bessel_j1(xs))


def test_j1_at_one_matches_extended_precision_series():
    # the defining power series, 40 terms in 40-digit arithmetic
    with mpmath.workdps(40):
        half = mpmath.mpf(1) / 2
        ref = sum((-1) ** k * half ** (2 * k + 1) / (mpmath.factorial(k) * mpmath.factorial(k + 1))
                  for k in range(40))
    assert bessel_j1(1.0) == pytest.approx(float(ref), rel=1e-14)


def test_j1_known_values():
    assert bessel_j1(1.0) == pytest.approx(0.44005058574493355, rel=1e-14)
    assert abs(bessel_j1(3.8317059702075125)) < 1e-14  # first positive zero


def test_j1_accuracy_on_desk_range():
    xs = np.concatenate([np.linspace(0.0, 20.0, 401), np.geomspace(20.0, 1000.0, 400)])
    ours = bessel_j1(xs)
    ref = np.array([j1_reference(x) for x in xs])
    err = np.abs(ours - ref)
    away = np.abs(ref) > 1e-3
    assert np.max(err[away] / np.abs(ref[away])) <= 1e-10
    assert np.max(err) <= 1e-13


def test_j1_branches_agree_at_switch():
    for x in (X_SWITCH * (1 - 1e-9), X_SWITCH, X_SWITCH * (1 + 1e-9)):
        a = float(_j1_series(np.array([x]))[0])
        b = float(_j1_hankel(np.array([x]))[0])
        assert abs(a - b) <= 1e-10


def test_j1_envelope():
    # sup_{x >= 5} sqrt(x)|J1(x)| is 0.802803... (attained near x = 5.4275, mpmath),
    # slightly above sqrt(2/pi); the envelope settles to sqrt(2/pi) for large x
    xs = np.geomspace(5.0, 1e5, 3000)
    env = np.abs(bessel_j1(xs)) * np.sqrt(xs)
    assert np.max(env) <= 0.80281
    assert np.max(env[xs > 100]) <= math.sqrt(2 / math.pi) * 1.001
    peak = 5.427521376068803
    assert abs(bessel_j1(peak)) * math.sqrt(peak) == pytest.approx(0.8028031226189428, rel=1e-12)


def test_j1_satisfies_bessel_ode():
    xs = np.linspace(2.0, 40.0, 50)
    errs = []
    for h in (1e-2, 5e-3):
        f0, fp, fm = bessel_j1(xs), bessel_j1(xs + h), bessel_j1(xs - h)
        d1 = (fp - fm) / (2 * h)
        d2 = (fp - 2 * f0 + fm) / h ** 2
        errs.append(np.max(np.abs(xs ** 2 * d2 + xs * d1 + (xs ** 2 - 1) * f0)))
    assert errs[1] < errs[0] / 3.0  # second-order convergence of the residual
    assert errs[1] < 1e-3


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=0.0, max_value=900.0))
def test_j1_matches_mpmath_property(x):
    assert abs(bessel_j1(x) - j1_reference(x)) <= 1e-13


def test_profile_transform_origin_and_quadrature():
    assert profile_transform(0.0) == math.pi / 2
    ref, _ = sci_integrate.quad(lambda x: math.sqrt(1 - x * x) * math.cos(2 * math.pi * x), -1, 1,
                                epsabs=1e-13, epsrel=1e-13, limit=200)
    assert profile_transform(1.0) == pytest.approx(bessel_j1(2 * math.pi) / 2, rel=1e-15)
    assert abs(profile_transform(1.0) - ref) < 1e-9
    for y in (0.3, 2.7):
        r, _ = sci_integrate.quad(lambda x: math.sqrt(1 - x * x) * math.cos(2 * math.pi * x * y), -1, 1,
                                  epsabs=1e-13, epsrel=1e-13, limit=200)
        assert abs(profile_transform(y) - r) < 1e-9


def test_profile_transform_decay():
    ys = np.geomspace(1.0, 1e4, 500)
    assert np.max(np.abs(profile_transform(ys)) * ys ** 1.5) < 0.2


def test_integrate_examples():
    v, e = integrate(lambda x: x, 0.0, 1.0)
    assert abs(v - 0.5) < 1e-14
    v, _ = integrate(lambda x: np.sin(x) ** 2, 0.0, math.pi)
    assert abs(v - math.pi / 2) < 1e-12
    v, _ = integrate(lambda x: np.sqrt(np.maximum(1 - x * x, 0.0)), -1.0, 1.0, QuadratureSpec(rel_tol=1e-11))
    assert abs(v - math.pi / 2) < 1e-9


@pytest.mark.parametrize("f,a,b", [
    (lambda x: np.exp(-x) * np.cos(30 * x), 0.0, 3.0),
    (lambda x: np.sqrt(x), 0.0, 1.0),
    (lambda x: 1.0 / (1.0 + 100 * x * x), -1.0, 1.0),
])
def test_integrate_error_estimate_is_conservative(f, a, b):
    v, e = integrate(f, a, b, QuadratureSpec(rel_tol=1e-8))
    tight, _ = integrate(f, a, b, QuadratureSpec(rel_tol=1e-13))
    assert abs(v - tight) <= e


def test_integrate_complex_and_breakpoints():
    v, _ = integrate(lambda x: np.exp(1j * x), 0.0, math.pi, breakpoints=[1.0, 2.0])
    assert abs(v - 2j) < 1e-13


def test_integrate_depth_exhaustion_reports_estimate():
    with pytest.raises(QuadratureError) as info:
        integrate(lambda x: 1.0 / x, 0.0, 1.0, QuadratureSpec(max_depth=5))
    assert info.value.error_estimate > 0
    assert np.isfinite(info.value.value)


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(rel_tol=0.0)
    with pytest.raises(ValueError):
        QuadratureSpec(abs_tol=-1.0)
    with pytest.raises(ValueError):
        QuadratureSpec(nodes_per_panel=3)
    with pytest.raises(ValueError):
        integrate(lambda x: x, 1.0, 0.0)


def test_bessel_series_at_integer_ratio():
    # sum_r J1(2 pi r)/r = 1 - pi/2 from the Poisson identity at ratio 1
    v, e = bessel_series(1.0, tol=1e-12)
    assert abs(v - (1 - math.pi / 2)) < 1e-11
    assert e < 1e-12


def test_bessel_series_against_brute_force_mpmath():
    # partial sums with an explicit oscillating tail average, y = 0.37
    y = 0.37
    v, _ = bessel_series(y, tol=1e-10)
    n = 40000
    r = np.arange(1, n + 1, dtype=float)
    terms = bessel_j1(2 * math.pi * r * y) / r
    partial = np.cumsum(terms)
    # the tail decays like r^{-3/2}; averaging the last window is well below 1e-6
    assert abs(np.mean(partial[-2000:]) - v) < 1e-6


def test_bessel_series_rejects_tiny_argument():
    with pytest.raises(ValueError):
        bessel_series(0.0)
    with pytest.raises(SeriesError):
        bessel_series(1e-9)


@pytest.mark.parametrize("y", [50.0, 64.0, 100.0, 100.3, 1000.0])
def test_bessel_series_poisson_at_large_and_integer_arguments(y):
    # integer y must not pick up a roundoff phase (the tail has a sqrt branch at phase 0)
    n = int(math.floor(y))
    lhs = float(mpmath.fsum(mpmath.sqrt(max(1 - (mpmath.mpf(k) / y) ** 2, 0)) for k in range(-n, n + 1)))
    v, _ = bessel_series(y, tol=1e-10)
    assert abs(lhs - (math.pi / 2 * y + v)) < 1e-11


def test_oscillatory_tail_against_lerch():
    from leaky.specfun import oscillatory_power_tail
    for theta in (1e-13, 1e-6, 0.3, -2.0, 3.0):
        for s in (1.5, 2.5):
            v, _ = oscillatory_power_tail(s, theta, 100)
            ref = mpmath.expj(theta * 100) * mpmath.lerchphi(mpmath.expj(theta), s, 100)
            assert abs(v - complex(ref)) < 1e-15
