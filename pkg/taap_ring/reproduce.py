"""
Reference pipelines: each item recomputes published numbers of the ring
experiment and compares them against the reported values.
"""
import math
import logging
import dataclasses

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

import taap_ring.transport as tp

from taap_ring.constants import K_B, MICRON, MILLIMETER, NANOKELVIN, RB87, TWO_PI, hz, rad_per_s
from taap_ring.ensemble import rigid_rotation, thermal_velocities, tof_expand
from taap_ring.exception import AcceptanceFailure, ConfigError
from taap_ring.field import FieldConfig
from taap_ring.imaging import RingFitResult, render_image, ring_radius_from_image
from taap_ring.observables import (
    corrugation_attenuation,
    fit_tof_radius,
    flatness_from_fit,
    geometric_mean_frequency,
    gravitational_height,
    mach,
    modulation_extrema,
    peak_density,
    speed_of_sound
)
from taap_ring.potential import analytic_ring
from taap_ring.seeding import make_rng

logger = logging.getLogger(__name__)

REFERENCE_FIELD = {
    'alpha_G_per_cm': 70.0,
    'B_m_G': 1.4,
    'delta': 0.37,
    'phi0_deg': 0.0,
    'f_m_kHz': 5.02,
    'Omega_rf_kHz': 357.0,
    'f_rf_MHz': 2.55,
    'species': 'Rb87'
}

MEASURED_RADIUS = 436 * MICRON
MEASURED_OMEGA_R = rad_per_s(85.3)
RING_SPEED = rad_per_s(10.0)


@dataclass(frozen=True)
class Verdict:
    item: str
    quantity: str
    reported: float
    computed: float
    tolerance: str
    passed: bool

    def row(self) -> str:
        status = 'PASS' if self.passed else 'FAIL'
        return f'{self.item:<16} {self.quantity:<34} {self.reported:>12.4g} {self.computed:>12.4g}  {self.tolerance:<18} {status}'


def within(item, quantity, reported, computed, rel) -> Verdict:
    return Verdict(item, quantity, reported, computed, f'{100 * rel:g}%',
                   abs(computed - reported) <= rel * abs(reported))


def within_factor(item, quantity, reported, computed, factor) -> Verdict:
    ratio = computed / reported
    return Verdict(item, quantity, reported, computed, f'factor {factor:g}', 1 / factor <= ratio <= factor)


def at_most(item, quantity, bound, computed) -> Verdict:
    return Verdict(item, quantity, bound, computed, 'upper bound', computed <= bound)


def reference_config(**changes) -> FieldConfig:
    return FieldConfig.from_lab({**REFERENCE_FIELD, **changes})


def freq_table(seed: int) -> list[Verdict]:
    ring = analytic_ring(reference_config(), MEASURED_RADIUS)
    return [
        within('freq-table', 'omega_r [Hz]', 85.3, hz(ring.omega_r), 0.01),
        within('freq-table', 'omega_z [Hz]', 46.2, hz(ring.omega_z), 0.03),
        within('freq-table', 'omega_phi analytic vs measured [Hz]', 9.17, hz(ring.omega_phi), 0.15)
    ]


def centrifugal(seed: int) -> list[Verdict]:
    R = tp.centrifugal_radius(MEASURED_RADIUS, RING_SPEED, MEASURED_OMEGA_R)
    L = tp.angular_momentum(443.4 * MICRON, RING_SPEED, RB87)
    return [
        within('centrifugal', 'R at 2pi 10 rad/s [um]', 443.4, R / MICRON, 0.005),
        within('centrifugal', 'L [hbar]', 17000, L, 0.02)
    ]


def mach_number(seed: int) -> list[Verdict]:
    omega_ho = rad_per_s(geometric_mean_frequency(46, 85, 7.8))
    c = speed_of_sound(peak_density(3e5, omega_ho, RB87), RB87)
    v = RING_SPEED * 443 * MICRON
    return [
        within('mach', 'c_max [mm/s]', 1.75, c / MILLIMETER, 0.02),
        Verdict('mach', 'Mach number', 16, mach(v, c), '+-0.5', abs(mach(v, c) - 16) <= 0.5)
    ]


def corrugation(seed: int) -> list[Verdict]:
    return [within_factor('corrugation', 'attenuation at kz=50', 3e-23,
                          corrugation_attenuation(1 / MILLIMETER, 50 * MILLIMETER), 1.5)]


def _fit(h1, h2, phi1, phi2) -> RingFitResult:
    return RingFitResult(j0=1.0, k0=0.0, rho0=MEASURED_RADIUS, delta_rho=10 * MICRON, T_fit=1.0, mu_fit=0.0,
                         h1=h1, h2=h2, phi1=phi1, phi2=phi2)


def flatness_static(seed: int) -> list[Verdict]:
    fit = _fit(0.11, 0.20, math.radians(-118), math.radians(115))
    dU = flatness_from_fit(fit, 502 * NANOKELVIN)
    return [
        within('flatness-static', 'peak-to-peak [nK]', 250, dU / K_B / NANOKELVIN, 0.07),
        within('flatness-static', 'gravitational height [um]', 2.4, gravitational_height(dU) / MICRON, 0.08)
    ]


def flattest_phase(h1: float, h2: float, n: int = 720) -> float:
    """ Relative phase phi2 - 2 phi1 that minimizes the peak-to-peak of m(phi) """
    phases = TWO_PI * np.arange(n) / n
    spans = [np.subtract(*modulation_extrema(h1, h2, 0.0, p)[::-1]) for p in phases]
    return float(phases[int(np.argmin(spans))])


def flatness_moving(seed: int) -> list[Verdict]:
    h1, h2, T = 0.003, 0.002, 28 * NANOKELVIN
    bound = 2 * (h1 + h2) * T
    phase = flattest_phase(h1, h2)
    dU = flatness_from_fit(_fit(h1, h2, 0.0, phase), T)
    return [
        at_most('flatness-moving', 'peak-to-peak bound [pK]', bound / NANOKELVIN * 1e3,
                dU / K_B / NANOKELVIN * 1e3),
        within('flatness-moving', 'flattest phases [pK]', 189, dU / K_B / NANOKELVIN * 1e3, 0.15)
    ]


def bangbang(seed: int) -> list[Verdict]:
    phi_ddot, t_accel, omega_phi = rad_per_s(50), 0.2, rad_per_s(7.76)
    ring = analytic_ring(reference_config(), MEASURED_RADIUS)
    ring = dataclasses.replace(ring, omega_phi=omega_phi)
    lag = tp.bang_bang_jump(phi_ddot, omega_phi)
    dt = 0.2 * tp.STEP_FRACTION / omega_phi
    start = tp.ParticleState(0.0, 0.0)

    runs = {}
    for jumps in (True, False):
        schedule = tp.TransportSchedule.bang_bang(phi_ddot, t_accel, omega_phi, hold_time=1.0, jumps=jumps)
        runs[jumps] = (schedule, tp.integrate_pendulum(schedule, ring, start, dt, schedule.t_end, 'harmonic'))

    residual = tp.residual_amplitude(runs[True][1], runs[True][0], ring)
    sloshing = tp.sloshing_amplitude(runs[False][1], runs[False][0])
    return [
        at_most('bangbang', 'residual / lag', 1e-3, residual / lag),
        within('bangbang', 'no-jump sloshing [rad]', lag, sloshing, 0.02)
    ]


def tof(seed: int) -> list[Verdict]:
    rng = make_rng(seed, 'reproduce')
    R0, Omega, T, n = 443 * MICRON, RING_SPEED, 30 * NANOKELVIN, 300000
    phi = rng.uniform(-math.pi, math.pi, n)
    positions = np.column_stack([R0 * np.cos(phi), R0 * np.sin(phi)])
    velocities = rigid_rotation(positions, Omega) + thermal_velocities(n, T, rng, dims=2)

    times = np.arange(2, 31, 4) * 1e-3
    radii = []
    for t in times:
        expanded = tof_expand(positions, velocities, t)
        extent = 1.1 * R0 * math.sqrt(1 + (Omega * t) ** 2)
        radii.append(ring_radius_from_image(render_image(expanded, 8 * MICRON, extent)))

    _, fitted = fit_tof_radius(radii, times)
    return [within('tof', 'Omega [rad/s]', Omega, fitted, 0.01)]


ITEMS: dict[str, Callable[[int], list[Verdict]]] = {
    'freq-table': freq_table,
    'centrifugal': centrifugal,
    'mach': mach_number,
    'corrugation': corrugation,
    'flatness-static': flatness_static,
    'flatness-moving': flatness_moving,
    'bangbang': bangbang,
    'tof': tof
}


def run_items(names: list[str], seed: int = 0) -> list[Verdict]:
    """
    Run reference pipelines
    :param names: Item names, 'all' expands to every item
    :param seed: Seed for pipelines that sample
    :return: All verdicts in item order
    """
    if names == ['all']:
        names = list(ITEMS)

    unknown = [name for name in names if name not in ITEMS]
    if unknown:
        raise ConfigError(f'Unknown item(s) {", ".join(unknown)}; valid items: {", ".join(ITEMS)}')

    verdicts = []
    for name in names:
        logger.info('Reproducing %s', name)
        verdicts += ITEMS[name](seed)

    return verdicts


def check(verdicts: list[Verdict]):
    failed = [v for v in verdicts if not v.passed]
    if failed:
        raise AcceptanceFailure('Failed: ' + ', '.join(f'{v.item} {v.quantity}' for v in failed))
