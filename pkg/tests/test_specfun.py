import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tomo import specfun as sf
from series_oracles import j_series, sph_j_series, sph_y_series, y0_series

rng = np.random.default_rng(20240611)


def rel(a, b):
    return abs(a - b) / abs(b)


def test_j0_at_zero_and_one():
    assert sf.bessel_j(0, 0) == 1
    assert rel(sf.bessel_j(0, 1.0), 0.7651976865579666) <= 1e-10


@pytest.mark.parametrize("order", [0, 1, 3, 7, 15])
def test_bessel_matches_power_series(order):
    for _ in range(10):
        z = complex(*rng.uniform(-14, 14, 2))
        assert rel(sf.bessel_j(order, z), j_series(order, z)) <= 1e-10


def test_reflection_is_exact():
    z = complex(*rng.normal(size=2))
    assert sf.bessel_j(-3, z) == -sf.bessel_j(3, z)
    assert sf.bessel_j(-4, z) == sf.bessel_j(4, z)
    assert sf.hankel1(-5, z) == -sf.hankel1(5, z)


def test_derivative_small_argument():
    assert sf.bessel_j_derivative(0, 0) == 0
    assert sf.bessel_j_derivative(1, 0) == pytest.approx(0.5)


def test_derivative_against_central_difference():
    # frozen from (J_2(z+h) - J_2(z-h)) / 2h, h = 1e-6
    frozen = 0.13516983110085404 + 0.11434192296461143j
    assert rel(sf.bessel_j_derivative(2, 0.5 + 0.5j), frozen) <= 1e-8


def test_hankel_at_i_against_series():
    ref = j_series(0, 1j) + 1j * y0_series(1j)
    assert rel(sf.hankel1(0, 1j), ref) <= 1e-10
    assert rel(sf.hankel1(0, 1j), -0.26803248203398855j) <= 1e-12


def test_hankel_envelope():
    for y in (20.0, 40.0):
        z = 3.0 + 1j * y
        env = abs(z) ** -0.5 * np.exp(-z.imag)
        ratio = abs(sf.hankel1(0, z)) / env
        assert 0.5 < ratio < 1.0  # tends to sqrt(2/pi)


def test_hankel_singular_at_zero():
    with pytest.raises(sf.BesselDomainError):
        sf.hankel1(0, 0)
    with pytest.raises(sf.BesselDomainError):
        sf.sph_hankel1(2, 0)


def test_domain_errors():
    with pytest.raises(sf.BesselDomainError):
        sf.bessel_j(0, complex("nan"))
    with pytest.raises(sf.BesselDomainError):
        sf.bessel_j(513, 1.0)
    with pytest.raises(sf.BesselDomainError):
        sf.bessel_j(1.5, 1.0)
    with pytest.raises(sf.BesselDomainError):
        sf.bessel_j(0, 2e3)
    with pytest.raises(sf.BesselDomainError):
        sf.sph_bessel_j(-1, 1.0)


def test_order_cap_boundary_derivative():
    # the derivative at the cap reaches order 513 internally
    assert np.isfinite(sf.bessel_j_derivative(512, 300.0 + 0j))


def test_array_argument():
    z = np.array([0.1, 1.0 + 1j, 2j])
    out = sf.bessel_j(2, z)
    assert out.shape == (3,)
    assert np.allclose(out, [sf.bessel_j(2, x) for x in z], rtol=0, atol=0)


def test_spherical_closed_forms():
    assert sf.sph_bessel_j(0, 0) == 1
    for _ in range(10):
        z = complex(*rng.uniform(0.2, 5, 2))
        assert rel(sf.sph_bessel_j(1, z), np.sin(z) / z ** 2 - np.cos(z) / z) <= 1e-12
        assert rel(sf.sph_hankel1(0, z), -1j * np.exp(1j * z) / z) <= 1e-14
        assert rel(sf.sph_hankel1(1, z), -(1 + 1j / z) * np.exp(1j * z) / z) <= 1e-14


def test_spherical_against_half_integer_series():
    assert rel(sf.sph_bessel_j(5, 2 + 1j), sph_j_series(5, 2 + 1j)) <= 1e-10
    ref = sph_j_series(3, 1 + 2j) + 1j * sph_y_series(3, 1 + 2j)
    assert rel(sf.sph_hankel1(3, 1 + 2j), ref) <= 1e-10
    assert rel(sf.sph_hankel1(3, 1 + 2j), 0.359206538032397 + 0.2608580791878218j) <= 1e-12


def test_spherical_derivative():
    z = 0.7 + 0.3j
    h = 1e-6
    fd = (sf.sph_bessel_j(2, z + h) - sf.sph_bessel_j(2, z - h)) / (2 * h)
    assert rel(sf.sph_bessel_j_derivative(2, z), fd) <= 1e-8


@settings(max_examples=200, deadline=None)
@given(m=st.integers(0, 20), r=st.floats(0.1, 50), phase=st.floats(0, np.pi))
def test_wronskian(m, r, phase):
    z = r * np.exp(1j * phase)
    w = sf.bessel_j(m, z) * sf.hankel1_derivative(m, z) - sf.bessel_j_derivative(m, z) * sf.hankel1(m, z)
    assert rel(w, 2j / (np.pi * z)) <= 1e-8


@settings(max_examples=200, deadline=None)
@given(m=st.integers(1, 60), r=st.floats(0.5, 40), phase=st.floats(-np.pi, np.pi))
def test_recurrence(m, r, phase):
    z = r * np.exp(1j * phase)
    lhs = sf.bessel_j(m - 1, z) + sf.bessel_j(m + 1, z)
    rhs = 2 * m / z * sf.bessel_j(m, z)
    scale = abs(sf.bessel_j(m - 1, z)) + abs(sf.bessel_j(m + 1, z))
    assert abs(lhs - rhs) <= 1e-8 * scale
