import math

import numpy as np
import pytest

from metric import (ManifoldParams, WarpProfile, build_profile, choose_nu, effective_potential, export_profile,
                    mean_curvature, radial_curvature, sphere_mode, tilde_potential)
from utils import read_csv


def envelope(r):
    return 1.0 + np.log1p(np.asarray(r, dtype=float))


@pytest.fixture
def params():
    return ManifoldParams(n=3, K0=-1.0, h=envelope)


def test_parameter_validation():
    with pytest.raises(ValueError):
        ManifoldParams(n=1, K0=-1.0, h=envelope)
    with pytest.raises(ValueError):
        ManifoldParams(n=3, K0=0.0, h=envelope)
    with pytest.raises(ValueError):
        ManifoldParams(n=3, K0=-1.0, h=envelope, b=5.0)
    with pytest.raises(ValueError, match="0<delta<1/2"):
        ManifoldParams(n=3, K0=-1.0, h=envelope, delta=0.6)


def test_derived_constants(params):
    assert params.sqrt_k == 1.0
    assert params.tau == 1.0
    assert params.bessel_offset == 0.0
    assert ManifoldParams(n=5, K0=-4.0, h=envelope).tau == pytest.approx(4.0)


def test_sphere_modes():
    assert sphere_mode(3, 0) == (0.0, 1)
    assert sphere_mode(3, 1) == (2.0, 3)
    assert sphere_mode(3, 2) == (6.0, 5)
    assert sphere_mode(4, 1) == (3.0, 4)


def test_choose_nu_gives_order_above_one():
    i, lam, nu = choose_nu(3)
    assert (i, lam) == (1, 2.0)
    assert nu == pytest.approx(1.5)
    for n in range(2, 8):
        assert choose_nu(n)[2] > 1.0


def test_profile_pieces(params):
    profile = WarpProfile(params)
    r = np.array([0.3, 1.0])
    np.testing.assert_allclose(profile.f1(r), r)
    np.testing.assert_allclose(profile.f1_prime(r), 1.0)
    np.testing.assert_allclose(profile.f1_second(r), 0.0, atol=1e-14)
    a = params.sqrt_k + 1.0
    r = np.array([2.0, 5.0, 9.0])
    np.testing.assert_allclose(profile.f1(r), np.exp(a * (r - 2.0)))
    np.testing.assert_allclose(radial_curvature(profile, r), -a * a)


def test_blend_is_smooth(params):
    profile = WarpProfile(params)
    for edge in (1.0, 2.0):
        L, L1, _ = profile.log_derivatives(np.array([edge - 1e-7, edge + 1e-7]))
        assert abs(L[1] - L[0]) < 1e-5
        assert abs(L1[1] - L1[0]) < 1e-4
    r = np.linspace(1.01, 1.99, 200)
    assert np.all(profile.f1(r) > 0)


def test_blend_derivatives_are_consistent(params):
    profile = WarpProfile(params)
    r = np.linspace(1.05, 1.95, 40)
    step = 1e-6
    L_plus, L1_plus, _ = profile.log_derivatives(r + step)
    L_minus, L1_minus, _ = profile.log_derivatives(r - step)
    _, L1, L2 = profile.log_derivatives(r)
    np.testing.assert_allclose((L_plus - L_minus) / (2 * step), L1, rtol=1e-6, atol=1e-6)
    np.testing.assert_allclose((L1_plus - L1_minus) / (2 * step), L2, rtol=1e-5, atol=1e-5)


def test_effective_potential_on_the_euclidean_core(params):
    profile = WarpProfile(params)
    _, lam, nu = params.mode
    r = np.linspace(0.05, 1.0, 30)
    np.testing.assert_allclose(effective_potential(profile, lam, r), (nu * nu - 0.25) / r**2, rtol=1e-12)


def test_tilde_potential_tends_to_band_bottom_plus_shift(params):
    V = tilde_potential(params)
    a = params.sqrt_k + 1.0
    # f1'/f1 = a on [2, inf): (n-1)/2 a^2 for n=3, angular term decays
    assert V(40.0) == pytest.approx(a * a, rel=1e-12)


def test_mean_curvature(params):
    profile = WarpProfile(params)
    assert mean_curvature(profile, 0.5) == pytest.approx(2.0 / 0.5)
    assert mean_curvature(profile, 5.0) == pytest.approx(2.0 * (params.sqrt_k + 1.0))


def test_rejects_non_positive_radius(params):
    with pytest.raises(ValueError):
        WarpProfile(params).f1(np.array([0.0, 1.0]))


class _ConstantTail:
    """Perturbation with f = 0 beyond b - delta."""

    def __init__(self, params):
        self.r_start = params.b - params.delta
        self.r_end = 50.0
        self.sqrt_k = params.sqrt_k
        self.ell0 = (params.sqrt_k + 1.0) * (self.r_start - 2.0)

    def evaluate(self, r):
        r = np.asarray(r, dtype=float)
        return np.zeros_like(r), np.zeros_like(r), self.ell0 + self.sqrt_k * (r - self.r_start)


def test_perturbed_profile_uses_tail(params):
    tail = _ConstantTail(params)
    profile = build_profile(params, tail)
    r = np.array([20.0, 40.0])
    np.testing.assert_allclose(radial_curvature(profile, r), params.K0)
    with pytest.raises(ValueError):
        profile.f1(np.array([60.0]))


def test_build_profile_checks_start(params):
    tail = _ConstantTail(params)
    tail.r_start = 9.0
    with pytest.raises(ValueError):
        build_profile(params, tail)


def test_export_profile(params, tmp_path):
    path = tmp_path / "profile.csv"
    export_profile(WarpProfile(params), str(path), np.linspace(0.1, 20.0, 50), config_hash="abc")
    assert path.read_text().startswith("# config_hash=abc")
    frame = read_csv(str(path))
    assert list(frame.columns) == ["r", "f1", "f1_prime", "f1_second", "K_rad", "V_eff"]
    assert len(frame) == 50
    assert math.isclose(frame["f1"].iloc[0], 0.1, rel_tol=1e-12)
