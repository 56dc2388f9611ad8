import math

import numpy as np
import pytest

from taap_ring.constants import GRAVITY, HBAR, MICRON, TWO_PI, hz
from taap_ring.exception import AdiabaticityViolation, DomainError, NoMinimum
from taap_ring.field import resonance_radius
from taap_ring.potential import (
    adiabatic_potential,
    adiabaticity_check,
    analytic_ring,
    characterize_numeric,
    gravitational_sag,
    hessian,
    minimize_half_plane,
    ring_potential,
    taap_potential,
    trigonometric_interpolant
)


def test_potential_at_resonance_equals_rabi_energy(reference_config) -> None:
    static = reference_config.replace(B_m=0.0)
    R = resonance_radius(static)
    U = adiabatic_potential(static, np.array([R, 0.0, 0.0]), 0.0)
    assert U == pytest.approx(HBAR * static.Omega_rf, rel=1e-9)


def test_average_of_static_field_is_instantaneous_potential(reference_config) -> None:
    static = reference_config.replace(B_m=0.0)
    points = np.array([[500e-6, 10e-6, 5e-6], [0.0, 450e-6, -20e-6]])
    np.testing.assert_allclose(taap_potential(static, points), adiabatic_potential(static, points, 0.0), rtol=1e-12)


def test_taap_potential_shapes(reference_config) -> None:
    assert isinstance(taap_potential(reference_config, np.array([450e-6, 0.0, 0.0])), float)
    assert taap_potential(reference_config, np.full((4, 2, 3), 450e-6)).shape == (4, 2)


def test_gravity_adds_linear_term(reference_config) -> None:
    r = np.array([450e-6, 0.0, 30e-6])
    diff = taap_potential(reference_config, r, include_gravity=True) - taap_potential(reference_config, r)
    assert diff == pytest.approx(reference_config.species.mass * GRAVITY * 30e-6, rel=1e-9)


def test_quadrature_too_coarse(reference_config) -> None:
    with pytest.raises(DomainError):
        taap_potential(reference_config, np.zeros(3) + 1e-4, n_quad=4)


def test_analytic_frequencies_match_measured_trap(reference_config) -> None:
    ring = analytic_ring(reference_config, 436 * MICRON)

    assert hz(ring.omega_r) == pytest.approx(85.3, rel=0.01)
    assert hz(ring.omega_z) == pytest.approx(46.2, rel=0.03)
    assert hz(ring.omega_phi) == pytest.approx(10.27, rel=0.01)
    assert ring.V_bottom == pytest.approx(HBAR * TWO_PI * 357e3, rel=1e-12)
    assert ring.phi_trap == pytest.approx(math.pi)


def test_analytic_radial_frequency_below_omega_0(reference_ring) -> None:
    assert reference_ring.omega_r < reference_ring.omega_0
    beta = reference_ring.beta_m
    assert reference_ring.omega_r == pytest.approx(reference_ring.omega_0 * (1 + beta ** 2) ** -0.25)


def test_untilted_ring_has_no_pendulum(flat_ring) -> None:
    assert flat_ring.omega_phi == 0


def test_gravitational_sag(reference_ring) -> None:
    assert gravitational_sag(reference_ring) == pytest.approx(GRAVITY / reference_ring.omega_z ** 2)


def test_ring_potential_bottom(reference_ring) -> None:
    R, phi = reference_ring.radius, reference_ring.phi_trap
    lowest = ring_potential(reference_ring, np.array([[R * math.cos(phi), R * math.sin(phi)]]))[0]

    m = reference_ring.species.mass
    expected = reference_ring.V_bottom - 0.5 * reference_ring.delta * m * GRAVITY * R
    assert lowest == pytest.approx(expected, rel=1e-12)


def test_ring_potential_in_plane_matches_three_columns(reference_ring) -> None:
    points = np.array([[500e-6, 20e-6], [-300e-6, 400e-6]])
    padded = np.column_stack([points, np.zeros(2)])
    np.testing.assert_allclose(ring_potential(reference_ring, points), ring_potential(reference_ring, padded))


def test_ring_potential_adds_modulation(reference_ring) -> None:
    points = np.array([[500e-6, 0.0]])
    base = ring_potential(reference_ring, points)
    shifted = ring_potential(reference_ring, points, modulation=lambda phi: np.full_like(phi, 1e-30))
    assert shifted[0] - base[0] == pytest.approx(1e-30)


def test_hessian_of_quadratic_is_exact() -> None:
    A = np.array([[2.0, 0.5, 0.0], [0.5, 1.0, 0.2], [0.0, 0.2, 3.0]])

    def fn(points):
        return 0.5 * np.einsum('ni,ij,nj->n', points, A, points)

    H = hessian(fn, np.array([0.1, -0.2, 0.3]), np.eye(3), 1e-3)
    np.testing.assert_allclose(H, A, rtol=1e-6, atol=1e-9)


def test_minimize_half_plane_on_a_bowl() -> None:
    def bowl(p):
        return (p[0] - 1.1e-3) ** 2 + 4 * (p[1] + 2e-5) ** 2

    x, f = minimize_half_plane(bowl, (1e-3, 0.0), 1e-3, xtol=1e-12)
    np.testing.assert_allclose(x, [1.1e-3, -2e-5], atol=1e-9)
    assert f == pytest.approx(0.0, abs=1e-16)


def test_minimize_half_plane_leaves_domain() -> None:
    with pytest.raises(NoMinimum):
        minimize_half_plane(lambda p: p[0], (1e-3, 0.0), 1e-3)


def test_adiabaticity_of_reference_trap(reference_config, reference_ring) -> None:
    ratios = adiabaticity_check(reference_config, reference_ring)
    assert ratios['omega_m_over_omega_r'] > 50
    assert ratios['larmor_min_over_omega_m'] > 10


def test_slow_modulation_breaks_adiabaticity(reference_config) -> None:
    slow = reference_config.replace(omega_m=TWO_PI * 500)
    with pytest.raises(AdiabaticityViolation) as e:
        adiabaticity_check(slow, analytic_ring(slow))
    assert 'omega_m_over_omega_r' in e.value.ex_msg


@pytest.mark.slow
@pytest.mark.parametrize('beta', [0.1, 0.2, 0.384])
def test_numeric_ring_matches_analytic_limit(flat_config, beta) -> None:
    config = flat_config.replace(B_m=flat_config.B_m * beta / analytic_ring(flat_config).beta_m)
    char = characterize_numeric(config, n_quad=32, n_phi=4, include_gravity=False)
    ring = analytic_ring(config, char.ring_radius)

    assert char.omega_r == pytest.approx(ring.omega_r, rel=0.05)
    assert char.omega_z == pytest.approx(ring.omega_z, rel=0.05)
    assert char.z_min == pytest.approx(0.0, abs=1 * MICRON)
    assert char.profile_flatness() < 1e-9
    assert char.gravity_mode == 'off'


@pytest.mark.slow
def test_weak_modulation_radial_frequency(flat_config) -> None:
    weak = flat_config.replace(B_m=0.073e-4)
    ring = analytic_ring(weak)
    assert ring.beta_m == pytest.approx(0.02, rel=0.05)

    char = characterize_numeric(weak, n_quad=32, n_phi=1, include_gravity=False)
    assert char.omega_r == pytest.approx(ring.omega_0, rel=0.01)


@pytest.mark.slow
def test_numeric_pendulum_frequency(reference_config) -> None:
    tilted = reference_config.replace(delta=0.01, coupling='uniform')
    char = characterize_numeric(tilted, n_quad=32, n_phi=8, include_gravity=True)

    expected = math.sqrt(0.01 * GRAVITY / (2 * char.ring_radius))
    assert char.omega_phi == pytest.approx(expected, rel=0.02)
    assert char.gravity_mode == 'first_order'
    assert math.remainder(char.phi_min - tilted.phi_trap, TWO_PI) == pytest.approx(0.0, abs=0.05)


@pytest.mark.slow
def test_tilted_reference_trap(reference_config) -> None:
    char = characterize_numeric(reference_config, n_quad=32, n_phi=8, include_gravity=True, workers=4)

    assert abs(math.remainder(char.phi_min - math.pi, TWO_PI)) < 0.3
    assert char.z_min < 0
    phi, V = char.azimuthal_profile.T
    first_harmonic = np.mean(V * np.exp(-1j * phi))
    assert abs(np.angle(first_harmonic)) < 0.3
    assert char.summary()['include_gravity'] is True
    assert char.summary()['gravity_mode'] == 'first_order'


def test_far_detuned_potential_follows_detuning(flat_config) -> None:
    static = flat_config.replace(B_m=0.0)
    Omega = static.Omega_rf
    r = resonance_radius(static) * (static.omega_rf + 100 * Omega) / static.omega_rf

    U = taap_potential(static, np.array([r, 0.0, 0.0]))
    assert U == pytest.approx(HBAR * 100 * Omega, rel=0.01)


@pytest.mark.slow
def test_quadrature_converges_at_the_ring(reference_config) -> None:
    def valley(p):
        return taap_potential(reference_config, np.array([-p[0], 0.0, p[1]]), n_quad=32)

    (r, z), _ = minimize_half_plane(valley, (resonance_radius(reference_config), 0.0),
                                    resonance_radius(reference_config))
    point = np.array([-r, 0.0, z])

    coarse = taap_potential(reference_config, point, n_quad=64)
    fine = taap_potential(reference_config, point, n_quad=128)
    assert abs(fine - coarse) < 1e-10 * abs(fine)


def test_minimize_half_plane_respects_window() -> None:
    def slope(p):
        return (p[0] - 1e-3) ** 2 + 1e-3 * p[1]

    with pytest.raises(NoMinimum):
        minimize_half_plane(slope, (1e-3, 0.0), 1e-3, domain=(0.9e-3, 1.1e-3, -1e-4, 1e-4))

    x, _ = minimize_half_plane(lambda p: slope(p) + p[1] ** 2, (1e-3, 0.0), 1e-3,
                               domain=(0.9e-3, 1.1e-3, -1e-3, 1e-3))
    assert x[1] == pytest.approx(-5e-4, rel=1e-4)


def test_trigonometric_interpolant_of_a_harmonic() -> None:
    phis = TWO_PI * np.arange(8) / 8
    interpolant = trigonometric_interpolant(3.0 - 2.0 * np.cos(phis - 0.3))

    assert interpolant(0.3) == pytest.approx(1.0)
    assert interpolant(1.234) == pytest.approx(3.0 - 2.0 * math.cos(1.234 - 0.3))
    assert interpolant(0.3, 1) == pytest.approx(0.0, abs=1e-12)
    assert interpolant(0.3, 2) == pytest.approx(2.0)


@pytest.mark.slow
def test_first_order_gravity_needs_three_azimuths(reference_config) -> None:
    with pytest.raises(DomainError):
        characterize_numeric(reference_config, n_quad=16, n_phi=2, include_gravity=True)


@pytest.mark.slow
def test_strong_modulation_leaves_harmonic_dressing_limit(flat_config) -> None:
    config = flat_config.replace(B_m=flat_config.B_m / analytic_ring(flat_config).beta_m)
    char = characterize_numeric(config, n_quad=32, n_phi=4, include_gravity=False)
    ring = analytic_ring(config, char.ring_radius)

    assert ring.beta_m == pytest.approx(1.0)
    assert char.omega_r < 0.8 * ring.omega_r


@pytest.mark.slow
def test_stiff_ring_holds_a_sagged_minimum(flat_config) -> None:
    stiff = flat_config.replace(alpha=4 * flat_config.alpha, B_m=4 * flat_config.B_m,
                                omega_rf=4 * flat_config.omega_rf)
    char = characterize_numeric(stiff, n_quad=32, n_phi=4, include_gravity=True)

    assert char.gravity_mode == 'sagged'
    assert char.z_min == pytest.approx(-GRAVITY / char.omega_z ** 2, rel=0.15)
    assert char.omega_phi < 1e-3 * char.omega_r
