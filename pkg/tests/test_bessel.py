import numpy as np
import pytest
from scipy import special

from bessel import (BesselConfig, BesselDomainError, bessel_j, bessel_j_complex, bessel_j_prime,
                    bessel_j_prime_complex, bessel_ode_residual, bessel_zeros, oracle_report, seam_gap,
                    zeros_interlace)


X = np.linspace(0.1, 50.0, 2000)


def test_half_integer_orders_match_closed_forms():
    scale = np.sqrt(2.0 / (np.pi * X))
    np.testing.assert_allclose(bessel_j(0.5, X), scale * np.sin(X), rtol=0, atol=1e-10)
    np.testing.assert_allclose(bessel_j(1.5, X), scale * (np.sin(X) / X - np.cos(X)), rtol=0, atol=1e-10)


def test_matches_reference_for_random_orders():
    rng = np.random.Generator(np.random.Philox(7))
    for nu in rng.uniform(0.0, 6.0, 10):
        x = rng.uniform(0.05, 40.0, 50)
        np.testing.assert_allclose(bessel_j(nu, x), special.jv(nu, x), rtol=0, atol=1e-10)


def test_bessel_equation_residual():
    rng = np.random.Generator(np.random.Philox(11))
    for nu, x in zip(rng.uniform(1.0, 3.0, 100), rng.uniform(0.1, 50.0, 100)):
        assert abs(bessel_ode_residual(nu, x)) <= 1e-7
    with pytest.raises(BesselDomainError):
        bessel_ode_residual(0.5, 2.0)


def test_derivative_recurrence_identity():
    x = np.linspace(0.2, 40.0, 300)
    for nu in (1.2, 1.5, 2.7):
        np.testing.assert_allclose(bessel_j_prime(nu, x), 0.5 * (bessel_j(nu - 1.0, x) - bessel_j(nu + 1.0, x)),
                                   rtol=0, atol=1e-10)


def test_derivative_matches_finite_difference():
    step = 1e-5
    fd = (bessel_j(1.5, 2.0 + step) - bessel_j(1.5, 2.0 - step)) / (2 * step)
    assert bessel_j_prime(1.5, 2.0) == pytest.approx(fd, abs=1e-8)


def test_small_argument_and_origin():
    assert bessel_j(0.0, 0.0) == 1.0
    assert bessel_j(2.5, 0.0) == 0.0
    assert bessel_j_prime(1.0, 0.0) == 0.5
    assert bessel_j(3.0, 1e-3) == pytest.approx(special.jv(3.0, 1e-3), rel=1e-12)


def test_array_shape_is_preserved():
    grid = np.linspace(0.1, 20.0, 12).reshape(3, 4)
    assert bessel_j(1.2, grid).shape == (3, 4)
    assert bessel_j_prime(1.2, grid).shape == (3, 4)
    assert isinstance(bessel_j(1.2, 3.0), float)


def test_complex_continuation():
    z = np.array([1.0 + 0.5j, 3.0 + 0.1j, 7.5 + 2.0j, 20.0 + 0.3j])
    np.testing.assert_allclose(bessel_j_complex(1.5, z), special.jv(1.5, z), rtol=1e-9)
    np.testing.assert_allclose(bessel_j_prime_complex(1.5, z), special.jvp(1.5, z), rtol=1e-8)
    real = bessel_j_complex(1.5, np.array([2.0 + 0j]))
    assert real[0].imag == 0.0


def test_zeros_of_half_order_are_multiples_of_pi():
    zeros = bessel_zeros(0.5, 6)
    np.testing.assert_allclose(zeros, np.pi * np.arange(1, 7), atol=1e-12)


def test_zeros_match_reference():
    np.testing.assert_allclose(bessel_zeros(1.0, 5), special.jn_zeros(1, 5), atol=1e-11)


def test_domain_errors():
    with pytest.raises(BesselDomainError):
        bessel_j(1.5, -1.0)
    with pytest.raises(BesselDomainError):
        bessel_j(-0.5, 1.0)
    with pytest.raises(BesselDomainError):
        bessel_j_complex(1.5, 800.0 + 0j)
    with pytest.raises(BesselDomainError):
        bessel_j_prime(0.5, 0.0)


def test_config_validation():
    with pytest.raises(ValueError):
        BesselConfig(tolerance=1e-3)


def test_closed_form_examples():
    assert bessel_j(0.5, np.pi / 2) == pytest.approx(2.0 / np.pi, rel=1e-10)
    assert bessel_j(1.5, 1e-8) == pytest.approx(0.0, abs=1e-11)
    assert bessel_j(1.5, 4.493409457909064) == pytest.approx(0.0, abs=1e-10)
    x = np.linspace(0.1, 50.0, 2000)
    scale = np.sqrt(2.0 / (np.pi * x))
    expected = scale * ((3.0 / x**2 - 1.0) * np.sin(x) - 3.0 * np.cos(x) / x)
    np.testing.assert_allclose(bessel_j(2.5, x), expected, rtol=0, atol=1e-10)


def test_first_root_of_order_three_halves():
    assert bessel_zeros(1.5, 1)[0] == pytest.approx(4.493409457909064, abs=1e-10)


@pytest.mark.parametrize("nu", [0.5, 1.5, 2.5, 3.2, 6.0, 9.5, 10.0])
def test_series_and_asymptotics_agree_at_switch(nu):
    assert seam_gap(nu) <= 1e-8
    below, above = bessel_j(nu, np.array([15.0 - 1e-9, 15.0 + 1e-9]))
    assert abs(below - above) <= 1e-8


def test_large_order_near_switch_radius():
    x = np.linspace(13.0, 20.0, 141)
    for nu in (8.5, 9.2, 9.5, 10.0):
        np.testing.assert_allclose(bessel_j(nu, x), special.jv(nu, x), rtol=0, atol=1e-9)


@pytest.mark.parametrize("nu", [0.5, 1.5, 2.2])
def test_zeros_interlace(nu):
    assert zeros_interlace(nu, 10)
    lower, upper = bessel_zeros(nu, 6), bessel_zeros(nu + 1.0, 5)
    assert all(a < b < c for a, b, c in zip(lower, upper, lower[1:]))


def test_complex_derivative_at_origin():
    assert bessel_j_prime_complex(1.5, 0j) == 0j
    assert bessel_j_prime_complex(1.0, np.array([0j, 1.0 + 0j]))[0] == 0.5


def test_complex_series_truncation_refinement():
    coarse = bessel_j_complex(1.5, 1j, BesselConfig(series_terms=30))
    fine = bessel_j_complex(1.5, 1j, BesselConfig(series_terms=40))
    assert abs(coarse - fine) <= 1e-10
    assert fine == pytest.approx(complex(special.jv(1.5, 1j)), rel=1e-10)


def test_oracle_report():
    report = oracle_report(orders=(1.118, 9.5))
    assert report["closed_form_error"] <= 1e-10
    assert report["ode_residual"] <= 1e-7
    assert report["seam_gap"] <= 1e-8
    assert report["interlacing"]
