import math
import dataclasses

import numpy as np
import pytest

from taap_ring.constants import HBAR, MICRON, RB87, TWO_PI, species_by_name
from taap_ring.exception import ConfigError, DomainError, ZeroField
from taap_ring.field import (
    FieldConfig,
    instantaneous_field,
    quadrupole_field,
    resonance_radius,
    rf_amplitude_to_rabi,
    rf_coupling,
    rf_rabi_to_amplitude,
    tilt_direction,
    trap_minimum_angle
)


def test_rabi_frequency_is_back_computed(reference_config) -> None:
    assert reference_config.Omega_rf == pytest.approx(TWO_PI * 357e3, rel=1e-12)


def test_rabi_amplitude_conversions_are_inverse(reference_config) -> None:
    species = reference_config.species
    B = rf_rabi_to_amplitude(TWO_PI * 100e3, species, kappa=0.5)
    assert rf_amplitude_to_rabi(B, species, kappa=0.5) == pytest.approx(TWO_PI * 100e3, rel=1e-12)


def test_lab_round_trip(reference_config) -> None:
    lab = reference_config.to_lab()
    again = FieldConfig.from_lab(lab).to_lab()

    assert again.keys() == lab.keys()
    for key, value in lab.items():
        if isinstance(value, str):
            assert again[key] == value
        else:
            assert again[key] == pytest.approx(value, rel=1e-12)


@pytest.mark.parametrize('change', [
    {'delta': 1.0},
    {'delta': -0.1},
    {'alpha_G_per_cm': 0.0},
    {'f_m_kHz': -5.0},
    {'coupling': 'diagonal'},
    {'species': 'Cs133'},
])
def test_invalid_lab_config(reference_field, change) -> None:
    with pytest.raises(ConfigError):
        FieldConfig.from_lab({**reference_field, **change})


def test_rf_amplitude_given_twice(reference_field) -> None:
    with pytest.raises(ConfigError):
        FieldConfig.from_lab({**reference_field, 'B_rf_G': 0.5})


def test_missing_key(reference_field) -> None:
    del reference_field['f_rf_MHz']
    with pytest.raises(ConfigError) as e:
        FieldConfig.from_lab(reference_field)
    assert 'f_rf_MHz' in e.value.ex_msg


def test_direct_construction_validates(reference_config) -> None:
    with pytest.raises(ConfigError):
        reference_config.replace(omega_m=0.0)


def test_quadrupole_field() -> None:
    B = quadrupole_field(0.7, np.array([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(B, [0.7, 1.4, -4.2])


def test_modulation_field_at_the_centre(reference_config) -> None:
    B = instantaneous_field(reference_config.replace(phi0=math.pi / 2), np.zeros(3), math.pi / 2)
    np.testing.assert_allclose(B, reference_config.B_m * np.array([0.0, reference_config.delta, 1.0]), atol=1e-18)


def test_instantaneous_field_broadcasts(reference_config) -> None:
    points = np.zeros((5, 3))
    theta = np.linspace(0, math.pi, 7)[:, np.newaxis]
    assert instantaneous_field(reference_config, points, theta).shape == (7, 5, 3)


def test_zero_field_has_no_coupling(reference_config) -> None:
    with pytest.raises(ZeroField):
        rf_coupling(reference_config, np.zeros(3), 0.0)


def test_projected_coupling(reference_config) -> None:
    in_plane = rf_coupling(reference_config, np.array([400 * MICRON, 0.0, 0.0]), 0.0)
    on_axis = rf_coupling(reference_config, np.array([0.0, 0.0, 100 * MICRON]), 0.0)

    assert in_plane == pytest.approx(reference_config.Omega_rf, rel=1e-12)
    assert on_axis == pytest.approx(0.0, abs=1e-9)


def test_uniform_coupling(reference_config) -> None:
    uniform = reference_config.replace(coupling='uniform')
    on_axis = rf_coupling(uniform, np.array([0.0, 0.0, 100 * MICRON]), 0.0)
    assert on_axis == pytest.approx(uniform.Omega_rf, rel=1e-12)


def test_resonance_radius(reference_config) -> None:
    R = resonance_radius(reference_config)
    larmor = reference_config.species.magnetic_moment * reference_config.alpha * R / HBAR
    assert larmor == pytest.approx(reference_config.omega_rf, rel=1e-12)
    assert 500 * MICRON < R < 540 * MICRON


def test_trap_sits_opposite_the_tilt() -> None:
    assert trap_minimum_angle(0.0) == pytest.approx(math.pi)
    assert trap_minimum_angle(math.pi / 2) == pytest.approx(3 * math.pi / 2)


@pytest.mark.parametrize('phi0', [0.0, 0.3, 2.0, 5.9])
def test_tilt_direction_inverts_trap_angle(phi0) -> None:
    back = tilt_direction(trap_minimum_angle(phi0))
    assert math.remainder(back - phi0, TWO_PI) == pytest.approx(0.0, abs=1e-12)


def test_quadrupole_is_divergence_and_curl_free() -> None:
    alpha, h = 0.7, 1e-6
    points = np.random.default_rng(3).uniform(-1e-3, 1e-3, (10, 3))

    for r in points:
        J = np.column_stack([
            (quadrupole_field(alpha, r + h * e) - quadrupole_field(alpha, r - h * e)) / (2 * h) for e in np.eye(3)
        ])
        assert abs(np.trace(J)) < 1e-9 * alpha
        np.testing.assert_allclose(J, J.T, atol=1e-9 * alpha)


def test_instantaneous_field_is_periodic(reference_config) -> None:
    r = np.array([400e-6, -100e-6, 30e-6])
    theta = np.linspace(0, TWO_PI, 7)
    np.testing.assert_allclose(instantaneous_field(reference_config, r, theta + TWO_PI),
                               instantaneous_field(reference_config, r, theta), rtol=1e-12, atol=1e-18)


def test_untilted_coupling_is_axially_symmetric(reference_config) -> None:
    untilted = reference_config.replace(delta=0.0)
    phi = np.linspace(0, TWO_PI, 9)
    points = np.column_stack([450e-6 * np.cos(phi), 450e-6 * np.sin(phi), np.full(9, -20e-6)])

    coupling = rf_coupling(untilted, points, 0.7)
    np.testing.assert_allclose(coupling, coupling[0], rtol=1e-12)


def test_coupling_is_linear_in_rf_amplitude(reference_config) -> None:
    r = np.array([430e-6, 50e-6, -10e-6])
    doubled = reference_config.replace(B_rf=2 * reference_config.B_rf)
    assert rf_coupling(doubled, r, 1.1) == pytest.approx(2 * rf_coupling(reference_config, r, 1.1), rel=1e-12)


def test_species_lookup() -> None:
    assert species_by_name('Rb87') is RB87
    with pytest.raises(ConfigError):
        species_by_name('Cs133')


@pytest.mark.parametrize('change', [{'mass': 0.0}, {'m_F': 0.0}, {'scattering_length': -1e-9}])
def test_invalid_species(change) -> None:
    with pytest.raises(DomainError):
        dataclasses.replace(RB87, **change)
