"""
Scalar observables derived from fits and trap parameters.
"""
import math
import logging

import numpy as np

from scipy.optimize import curve_fit, minimize_scalar

from taap_ring.constants import AtomSpecies, HBAR, K_B, RB87, TWO_PI
from taap_ring.exception import DomainError, FitDiverged, FlowBlocked
from taap_ring.imaging import RingFitResult, azimuthal_modulation

logger = logging.getLogger(__name__)

SCAN_POINTS = 4096


def modulation_extrema(h1: float, h2: float, phi1: float, phi2: float,
                       n_scan: int = SCAN_POINTS) -> tuple[float, float]:
    """ Minimum and maximum of m(phi) from a dense scan refined by bounded Brent around the best samples """
    phi = TWO_PI * np.arange(n_scan) / n_scan
    m = azimuthal_modulation(h1, h2, phi1, phi2, phi)
    step = TWO_PI / n_scan

    def refine(i, sign):
        res = minimize_scalar(lambda p: sign * float(azimuthal_modulation(h1, h2, phi1, phi2, p)),
                              bounds=(phi[i] - step, phi[i] + step), method='bounded', options={'xatol': 1e-12})
        return min(sign * m[i], res.fun) * sign

    lowest = refine(int(np.argmin(m)), 1)
    highest = refine(int(np.argmax(m)), -1)
    return lowest, highest


def flatness_from_fit(fit: RingFitResult, T_phys: float) -> float:
    """
    Peak-to-peak azimuthal potential by Boltzmann inversion of the fitted density
    :param fit: Ring fit, h1 and h2 in units of T_fit
    :param T_phys: Temperature of the cloud in K
    :return: Energy in J
    """
    if not T_phys > 0:
        raise DomainError(f'T_phys must be positive, got {T_phys}')

    lowest, highest = modulation_extrema(fit.h1, fit.h2, fit.phi1, fit.phi2)
    return K_B * T_phys * (highest - lowest) / fit.T_fit


def gravitational_height(deltaU: float, species: AtomSpecies = RB87) -> float:
    """ Height in m that gravity turns into the energy deltaU """
    return deltaU / (species.mass * species.gravity)


def density_variation(deltaE: float, v: float, species: AtomSpecies = RB87) -> float:
    """ Fractional density change -1 + sqrt(1 + 2 dE / (m v^2)) of a flow crossing a step dE """
    if not v > 0:
        raise DomainError(f'v must be positive, got {v}')

    ratio = 1 + 2 * deltaE / (species.mass * v ** 2)
    if ratio < 0:
        raise FlowBlocked(f'Barrier {deltaE:.3g} J exceeds the kinetic energy of the flow')

    return -1 + math.sqrt(ratio)


def interaction_strength(species: AtomSpecies = RB87) -> float:
    """ U0 = 4 pi hbar^2 a / m """
    return 4 * math.pi * HBAR ** 2 * species.scattering_length / species.mass


def speed_of_sound(n: float, species: AtomSpecies = RB87) -> float:
    if n < 0:
        raise DomainError(f'Density must be non-negative, got {n}')
    return math.sqrt(n * interaction_strength(species) / species.mass)


def peak_density(N: float, omega_ho: float, species: AtomSpecies = RB87) -> float:
    """ Thomas-Fermi peak density (1 / 8 pi) [15 N (m omega_ho / (hbar sqrt(a)))^3]^(2/5) """
    if not (N > 0 and omega_ho > 0):
        raise DomainError('N and omega_ho must be positive')

    inverse_length = species.mass * omega_ho / (HBAR * math.sqrt(species.scattering_length))
    return (15 * N * inverse_length ** 3) ** 0.4 / (8 * math.pi)


def mach(v: float, c: float) -> float:
    if not c > 0:
        raise DomainError('Speed of sound must be positive')
    return v / c


def geometric_mean_frequency(*omegas: float) -> float:
    return math.prod(omegas) ** (1 / len(omegas))


def tof_radius(t, R0: float, Omega: float):
    """ R0 sqrt(1 + (Omega t)^2) """
    return R0 * np.sqrt(1 + (Omega * np.asarray(t, dtype=float)) ** 2)


def fit_tof_radius(radii, times) -> tuple[float, float]:
    """
    Fit R(t) = R0 sqrt(1 + (Omega t)^2) to ring radii after time of flight
    :param radii: Radii in m
    :param times: Flight times in s
    :return: (R0, |Omega|)
    """
    r = np.asarray(radii, dtype=float)
    t = np.asarray(times, dtype=float)

    if len(r) < 3 or len(r) != len(t):
        raise DomainError('Need at least 3 matching (radius, time) pairs')

    i0 = int(np.argmin(t))
    R0 = float(r[i0])
    i1 = int(np.argmax(t))
    growth = max((r[i1] / R0) ** 2 - 1, 1e-6)
    Omega = math.sqrt(growth) / t[i1] if t[i1] > 0 else 1.0

    try:
        (R0, Omega), _ = curve_fit(tof_radius, t, r, p0=[R0, Omega], maxfev=5000)
    except (RuntimeError, ValueError) as e:
        raise FitDiverged(e)

    logger.debug('TOF fit: R0=%.4g m, Omega=%.4g rad/s', R0, Omega)
    return float(R0), float(abs(Omega))


def corrugation_attenuation(k: float, z: float) -> float:
    """ exp(-k z) / sqrt(k z), suppression of a field ripple of wavenumber k at distance z """
    kz = k * z
    if not kz > 0:
        raise DomainError(f'k z must be positive, got {kz}')
    return math.exp(-kz) / math.sqrt(kz)
