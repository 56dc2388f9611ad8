import math

import numpy as np
import pytest

from taap_ring.constants import K_B, MICRON, MILLIMETER, NANOKELVIN, RB87, TWO_PI, rad_per_s
from taap_ring.exception import DomainError, FlowBlocked
from taap_ring.imaging import RingFitResult, azimuthal_modulation
from taap_ring.observables import (
    corrugation_attenuation,
    density_variation,
    fit_tof_radius,
    flatness_from_fit,
    geometric_mean_frequency,
    gravitational_height,
    mach,
    modulation_extrema,
    peak_density,
    speed_of_sound,
    tof_radius
)


def fit_with(h1, h2, phi1, phi2, T_fit=1.0) -> RingFitResult:
    return RingFitResult(j0=1.0, k0=0.0, rho0=400 * MICRON, delta_rho=10 * MICRON, T_fit=T_fit, mu_fit=0.0,
                         h1=h1, h2=h2, phi1=phi1, phi2=phi2)


@pytest.mark.parametrize('h1, h2, phi1, phi2', [
    (0.11, 0.20, math.radians(-118), math.radians(115)),
    (0.3, 0.0, 1.0, 0.0),
    (0.0, 0.2, 0.0, -2.0),
])
def test_extrema_match_dense_scan(h1, h2, phi1, phi2) -> None:
    phi = np.linspace(0, TWO_PI, 200001)
    m = azimuthal_modulation(h1, h2, phi1, phi2, phi)

    lowest, highest = modulation_extrema(h1, h2, phi1, phi2)
    assert lowest == pytest.approx(m.min(), abs=1e-9)
    assert highest == pytest.approx(m.max(), abs=1e-9)


def test_static_ring_flatness() -> None:
    dU = flatness_from_fit(fit_with(0.11, 0.20, math.radians(-118), math.radians(115)), 502 * NANOKELVIN)
    assert dU / K_B / NANOKELVIN == pytest.approx(250, rel=0.07)


def test_flatness_scales_with_fit_temperature() -> None:
    base = flatness_from_fit(fit_with(0.1, 0.1, 0.0, 0.0), 100 * NANOKELVIN)
    scaled = flatness_from_fit(fit_with(0.2, 0.2, 0.0, 0.0, T_fit=2.0), 100 * NANOKELVIN)
    assert scaled == pytest.approx(base)


@pytest.mark.parametrize('phi2', np.linspace(0, TWO_PI, 13))
def test_moving_ring_flatness_below_phase_free_bound(phi2) -> None:
    dU = flatness_from_fit(fit_with(0.003, 0.002, 0.0, phi2), 28 * NANOKELVIN)
    assert dU / K_B <= 2 * 0.005 * 28 * NANOKELVIN * (1 + 1e-9)


def test_flatness_needs_temperature() -> None:
    with pytest.raises(DomainError):
        flatness_from_fit(fit_with(0.1, 0.1, 0.0, 0.0), 0.0)


def test_gravitational_height() -> None:
    assert gravitational_height(K_B * 250 * NANOKELVIN) / MICRON == pytest.approx(2.4, rel=0.03)
    assert gravitational_height(K_B * 189e-12) * 1e9 == pytest.approx(1.8, rel=0.03)


def test_density_variation() -> None:
    v = 27.8 * MILLIMETER
    assert density_variation(0.0, v) == 0.0

    small = K_B * 10e-12
    expected = small / (RB87.mass * v ** 2)
    assert density_variation(small, v) == pytest.approx(expected, rel=1e-3)


def test_barrier_blocks_slow_flow() -> None:
    with pytest.raises(FlowBlocked):
        density_variation(-K_B * 1e-6, 1 * MILLIMETER)


def test_speed_of_sound_and_mach() -> None:
    omega_ho = rad_per_s(geometric_mean_frequency(46, 85, 7.8))
    c = speed_of_sound(peak_density(3e5, omega_ho))

    assert geometric_mean_frequency(46, 85, 7.8) == pytest.approx(31.2, rel=0.005)
    assert c / MILLIMETER == pytest.approx(1.75, rel=0.02)
    assert mach(rad_per_s(10) * 443 * MICRON, c) == pytest.approx(16, abs=0.5)


def test_hydrodynamic_domain_errors() -> None:
    with pytest.raises(DomainError):
        speed_of_sound(-1.0)
    with pytest.raises(DomainError):
        peak_density(0, 100.0)
    with pytest.raises(DomainError):
        mach(1.0, 0.0)


def test_tof_fit_recovers_rotation() -> None:
    times = np.linspace(2e-3, 30e-3, 8)
    radii = tof_radius(times, 443 * MICRON, rad_per_s(10))

    R0, Omega = fit_tof_radius(radii, times)
    assert R0 == pytest.approx(443 * MICRON, rel=1e-6)
    assert Omega == pytest.approx(rad_per_s(10), rel=1e-6)


def test_tof_fit_needs_three_points() -> None:
    with pytest.raises(DomainError):
        fit_tof_radius([1.0, 2.0], [0.0, 1.0])


def test_corrugation_attenuation() -> None:
    assert corrugation_attenuation(1 / MILLIMETER, 50 * MILLIMETER) == pytest.approx(2.7e-23, rel=0.02)
    with pytest.raises(DomainError):
        corrugation_attenuation(0.0, 1.0)
