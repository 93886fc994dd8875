import math

import numpy as np
import pytest

from schrodinger import (Energy, PrueferState, bessel_seed, boundary_values, export_trace, integrate, lommel_norm,
                         pruefer_flow, pruefer_trace, regular_pruefer_seed, regular_solution, regular_solution_grid,
                         rotation_angle, theta_phi_solutions, transfer_matrix)
from resonant_potential import constant_potential
from utils import read_csv

NU = 1.5


def test_energy_momenta():
    energy = Energy(5.0, tau=1.0)
    assert energy.k == pytest.approx(math.sqrt(5.0))
    assert energy.k_bar == pytest.approx(2.0)
    with pytest.raises(ValueError):
        Energy(0.5, tau=1.0).k_bar
    with pytest.raises(ValueError):
        Energy(-1.0)


def test_pruefer_state_roundtrip_values():
    state = PrueferState.from_solution(3.0, 0.4, -1.2, 1.5)
    u, up = state.solution(1.5)
    assert u == pytest.approx(0.4)
    assert up == pytest.approx(-1.2)


def test_bessel_seed_is_half_order_sine():
    lam = 4.0
    r = np.linspace(0.1, 3.0, 20)
    u, up = bessel_seed(0.5, lam, r)
    scale = math.sqrt(2.0 / (math.pi * 2.0))
    np.testing.assert_allclose(u, scale * np.sin(2.0 * r), atol=1e-12)
    np.testing.assert_allclose(up, scale * 2.0 * np.cos(2.0 * r), atol=1e-11)


def test_boundary_values_match_seed():
    u, up = boundary_values(NU, np.array([1.0, 2.0]))
    su, sup = bessel_seed(NU, np.array([1.0, 2.0]), 1.0)
    np.testing.assert_array_equal(u, su)
    np.testing.assert_array_equal(up, sup)


def test_lommel_norm_matches_quadrature():
    from scipy.integrate import quad
    for lam in (0.7, 2.0, 9.0):
        numeric = quad(lambda r: bessel_seed(NU, lam, r)[0] ** 2, 0.0, 3.0, epsabs=1e-13)[0]
        assert lommel_norm(NU, lam, 3.0) == pytest.approx(numeric, rel=1e-9)


def test_regular_solution_on_free_potential_is_closed_form(free_V):
    # beyond r = 1 the free tail is tau^2 = 1, so u solves u'' = (1 - lam) u
    lam = 3.0
    samples = regular_solution(free_V, lam, [0.3, 1.0, 2.0, 5.0])
    u1, up1 = bessel_seed(NU, lam, 1.0)
    k = math.sqrt(lam - 1.0)
    expected = u1 * math.cos(k * 4.0) + up1 / k * math.sin(k * 4.0)
    assert samples.u[0] == pytest.approx(bessel_seed(NU, lam, 0.3)[0], rel=1e-12)
    assert samples.u[1] == pytest.approx(u1, rel=1e-8)
    assert samples.u[3] == pytest.approx(expected, rel=1e-7, abs=1e-9)


def test_grid_solution_agrees_with_single_solution(free_V):
    lams = np.array([1.5, 2.5, 4.0])
    u, up, norm = regular_solution_grid(free_V, lams, [2.0, 6.0], with_norm=True)
    for i, lam in enumerate(lams):
        single = regular_solution(free_V, lam, [2.0, 6.0])
        np.testing.assert_allclose(u[i], single.u, rtol=1e-8, atol=1e-10)
        np.testing.assert_allclose(up[i], single.u_prime, rtol=1e-8, atol=1e-10)
    assert np.all(np.diff(norm, axis=1) > 0)
    with pytest.raises(ValueError):
        regular_solution_grid(free_V, lams, [0.2])


def test_norm_inside_core_matches_lommel(free_V):
    lam = 2.0
    _, _, norm = regular_solution_grid(free_V, [lam], [1.0], with_norm=True)
    assert norm[0, 0] == pytest.approx(lommel_norm(NU, lam, 1.0), rel=1e-8)


def test_wronskian_is_constant(wvn_V):
    theta, phi = theta_phi_solutions(wvn_V, 2.3, [0.7, 1.0, 4.0, 25.0])
    np.testing.assert_allclose(theta.wronskian(phi), 1.0, rtol=1e-8)


def test_transfer_matrix_has_unit_determinant(wvn_V):
    matrix = transfer_matrix(wvn_V, 2.7, 1.0, 40.0)
    assert np.linalg.det(matrix) == pytest.approx(1.0, rel=1e-7)
    np.testing.assert_array_equal(transfer_matrix(wvn_V, 2.7, 3.0, 3.0), np.eye(2))


def test_integrate_both_directions():
    V = constant_potential(0.0)
    rhs = lambda r, y, v: np.array([y[1], -y[0]])
    out = integrate(rhs, V, 1.0, np.array([math.sin(1.0), math.cos(1.0)]), [0.5, 1.0, 3.0])
    np.testing.assert_allclose(out[0], np.sin([0.5, 1.0, 3.0]), rtol=1e-9)


def test_pruefer_amplitude_is_constant_on_free_tail(free_V):
    k_bars = np.array([1.0, 1.5])
    logR2, theta = regular_pruefer_seed(free_V, k_bars)
    trace = pruefer_trace(free_V, k_bars, 1.0, 50.0, logR2, theta, samples=[10.0, 50.0])
    np.testing.assert_allclose(trace.logR2, logR2[:, None] * np.ones((1, 2)), atol=1e-9)
    np.testing.assert_allclose(trace.theta[:, 1], theta + k_bars * 49.0, rtol=1e-9)


def test_pruefer_flow_reproduces_direct_solution(wvn_V):
    lam = 2.44
    energy = Energy(lam, tau=1.0)
    start = regular_solution(wvn_V, lam, [1.0])
    state = PrueferState.from_solution(1.0, start.u[0], start.u_prime[0], energy.k_bar)
    end = pruefer_flow(wvn_V, energy, 1.0, 30.0, state)
    direct = regular_solution(wvn_V, lam, [30.0])
    u, up = end.solution(energy.k_bar)
    assert u == pytest.approx(direct.u[0], rel=1e-6, abs=1e-8)
    assert up == pytest.approx(direct.u_prime[0], rel=1e-6, abs=1e-8)


def test_pruefer_rejects_energies_below_band(free_V):
    with pytest.raises(ValueError):
        pruefer_trace(free_V, [-1.0], 1.0, 5.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        pruefer_trace(free_V, [1.0], 0.5, 5.0, 0.0, 0.0)


def test_rotation_angle_counts_zeros(free_V):
    lams = np.array([1.5, 3.0, 6.0])
    L = 30.0
    angle = rotation_angle(free_V, lams, L)
    r = np.linspace(0.01, L, 60001)
    for lam, value in zip(lams, angle):
        u = regular_solution(free_V, lam, r).u
        zeros = int(np.sum(np.sign(u[1:]) != np.sign(u[:-1])))
        assert int(value // np.pi) == zeros


def test_export_trace(tmp_path, free_V):
    k_bars = np.array([1.0])
    logR2, theta = regular_pruefer_seed(free_V, k_bars)
    trace = pruefer_trace(free_V, k_bars, 1.0, 5.0, logR2, theta, samples=np.linspace(1.0, 5.0, 9))
    path = tmp_path / "trace.csv"
    export_trace(trace, str(path), config_hash="00ff")
    frame = read_csv(str(path))
    assert list(frame.columns) == ["r", "logR2", "theta"]
    assert len(frame) == 9


def test_rotation_angle_is_monotone_across_core_zeros(free_V):
    # sqrt(lambda) / 2 crosses the first zero of J_1.5 near lambda = 80.7
    lams = np.linspace(75.0, 86.0, 45)
    angle = rotation_angle(free_V, lams, 30.0)
    assert np.all(np.diff(angle) > 0)


def test_rotation_angle_counts_zeros_at_high_energy(free_V):
    lams = np.array([79.0, 83.0, 120.0])
    L = 12.0
    angle = rotation_angle(free_V, lams, L)
    r = np.linspace(0.01, L, 120001)
    for lam, value in zip(lams, angle):
        u = regular_solution(free_V, lam, r).u
        zeros = int(np.sum(np.sign(u[1:]) != np.sign(u[:-1])))
        assert int(value // np.pi) == zeros


def test_theta_phi_wronskian_on_both_sides(wvn_V):
    r = [0.5, 1.0, 10.0, 100.0]
    theta, phi = theta_phi_solutions(wvn_V, 3.1, r)
    np.testing.assert_allclose(theta.wronskian(phi), 1.0, rtol=1e-7)
    theta_c, phi_c = theta_phi_solutions(wvn_V, 3.1 + 0.2j, r[:3])
    np.testing.assert_allclose(theta_c.wronskian(phi_c), 1.0, rtol=1e-7)


def test_regular_solution_is_combination_of_theta_phi(wvn_V):
    lam = 2.7
    r = np.array([0.6, 1.0, 3.0, 12.0, 40.0])
    theta, phi = theta_phi_solutions(wvn_V, lam, r)
    at_one = regular_solution(wvn_V, lam, [1.0])
    direct = regular_solution(wvn_V, lam, r)
    combined = at_one.u[0] * theta.u + at_one.u_prime[0] * phi.u
    np.testing.assert_allclose(combined, direct.u, rtol=1e-7, atol=1e-9)


def test_theta_phi_with_zero_effective_momentum():
    V = constant_potential(2.0)
    r = np.array([1.5, 2.0, 4.0])
    theta, phi = theta_phi_solutions(V, 2.0, r)
    np.testing.assert_allclose(theta.u, 1.0, atol=1e-10)
    np.testing.assert_allclose(phi.u, r - 1.0, atol=1e-10)


def test_transfer_matrix_free_quarter_period():
    matrix = transfer_matrix(constant_potential(0.0), 1.0, 2.0, 2.0 + math.pi / 2)
    np.testing.assert_allclose(matrix, [[0.0, 1.0], [-1.0, 0.0]], atol=1e-9)


def test_transfer_matrix_composes(wvn_V):
    rng = np.random.Generator(np.random.Philox(3))
    for _ in range(5):
        r0, r1, r2 = np.sort(rng.uniform(1.0, 30.0, 3))
        lam = float(rng.uniform(1.5, 6.0))
        whole = transfer_matrix(wvn_V, lam, r0, r2)
        parts = transfer_matrix(wvn_V, lam, r1, r2) @ transfer_matrix(wvn_V, lam, r0, r1)
        np.testing.assert_allclose(whole, parts, rtol=1e-7, atol=1e-7 * np.abs(whole).max())


def test_pruefer_matches_direct_integration_on_random_instances():
    from resonant_potential import wigner_von_neumann
    rng = np.random.Generator(np.random.Philox(21))
    for _ in range(50):
        c, k_bar0 = rng.uniform(0.5, 4.0), rng.uniform(1.0, 2.0)
        V = wigner_von_neumann(c=c, k_bar0=k_bar0, tau=1.0, nu=NU)
        lam = float(rng.uniform(1.3, 6.0))
        energy = Energy(lam, tau=1.0)
        start = regular_solution(V, lam, [1.0])
        state = PrueferState.from_solution(1.0, start.u[0], start.u_prime[0], energy.k_bar)
        end = pruefer_flow(V, energy, 1.0, 10.0, state)
        direct = regular_solution(V, lam, [10.0])
        R2 = direct.u_prime[0] ** 2 + energy.k_bar**2 * direct.u[0] ** 2
        assert math.exp(end.logR2) == pytest.approx(R2, rel=1e-6)
