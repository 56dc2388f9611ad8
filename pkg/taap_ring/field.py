"""
Magnetic field of the ring trap: a DC quadrupole, a homogeneous audio-frequency
modulation field that may be tilted away from the vertical, and a vertically
polarized RF field that enters through its coupling strength.
"""
import math
import dataclasses

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from taap_ring.constants import (
    AtomSpecies,
    RB87,
    HBAR,
    GAUSS,
    GAUSS_PER_CM,
    TWO_PI,
    ZERO_FIELD_THRESHOLD,
    species_by_name
)
from taap_ring.exception import ConfigError, ZeroField
from taap_ring.formating import check_format_of_field_config

Vec3 = npt.NDArray[np.float64]

COUPLINGS = ('projected', 'uniform')


def vec3(x: float, y: float, z: float) -> Vec3:
    return np.array([x, y, z], dtype=float)


def rf_rabi_to_amplitude(omega_rf_coupling: float, species: AtomSpecies, kappa: float = 1.0) -> float:
    """ RF amplitude in T that gives the Rabi frequency (rad/s) for a fully perpendicular field """
    return omega_rf_coupling * HBAR / (species.magnetic_moment * kappa)


def rf_amplitude_to_rabi(B_rf: float, species: AtomSpecies, kappa: float = 1.0) -> float:
    return kappa * species.magnetic_moment * B_rf / HBAR


def trap_minimum_angle(phi0: float) -> float:
    """
    Azimuth of the lowest point of the tilted ring for tilt direction phi0.
    The modulation vector (δ cos φ0, δ sin φ0, 1) lifts the side of the ring
    at φ0, so gravity pulls atoms to the opposite side.
    """
    return (phi0 + math.pi) % TWO_PI


def tilt_direction(phi_trap: float) -> float:
    """ Tilt direction phi0 that puts the lowest point of the ring at phi_trap """
    return phi_trap - math.pi


@dataclass(frozen=True)
class FieldConfig:
    alpha: float
    B_m: float
    delta: float
    phi0: float
    omega_m: float
    B_rf: float
    omega_rf: float
    species: AtomSpecies = RB87
    kappa: float = 1.0
    coupling: str = 'projected'

    def __post_init__(self):
        problems = []

        if not self.alpha > 0:
            problems.append('alpha > 0')
        if not self.B_m >= 0:
            problems.append('B_m >= 0')
        if not 0 <= self.delta < 1:
            problems.append('0 <= delta < 1')
        if not math.isfinite(self.phi0):
            problems.append('phi0 finite')
        if not self.omega_m > 0:
            problems.append('omega_m > 0')
        if not self.B_rf > 0:
            problems.append('B_rf > 0')
        if not self.omega_rf > 0:
            problems.append('omega_rf > 0')
        if not self.kappa > 0:
            problems.append('kappa > 0')
        if self.coupling not in COUPLINGS:
            problems.append(f'coupling in {COUPLINGS}')

        if problems:
            raise ConfigError(f'Invalid field config, violated: {", ".join(problems)}')

    @property
    def modulation_axis(self) -> Vec3:
        return vec3(self.delta * math.cos(self.phi0), self.delta * math.sin(self.phi0), 1.0)

    @property
    def Omega_rf(self) -> float:
        """ Rabi frequency for an RF field fully perpendicular to the local field """
        return rf_amplitude_to_rabi(self.B_rf, self.species, self.kappa)

    @property
    def phi_trap(self) -> float:
        return trap_minimum_angle(self.phi0)

    def replace(self, **changes) -> 'FieldConfig':
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_lab(cls, d: dict) -> 'FieldConfig':
        """
        Build a config from lab-unit keys
        :param d: Mapping with alpha_G_per_cm, B_m_G, delta, phi0_deg, f_m_kHz,
            f_rf_MHz, either B_rf_G or Omega_rf_kHz, and optional species, kappa, coupling
        :return: Validated FieldConfig in SI units
        """
        problems = check_format_of_field_config(d)
        if problems:
            raise ConfigError(f'Invalid field config: {", ".join(problems)}')

        species = species_by_name(d.get('species', RB87.name))
        kappa = d.get('kappa', 1.0)

        if 'B_rf_G' in d:
            B_rf = d['B_rf_G'] * GAUSS
        else:
            B_rf = rf_rabi_to_amplitude(TWO_PI * d['Omega_rf_kHz'] * 1e3, species, kappa)

        return cls(
            alpha=d['alpha_G_per_cm'] * GAUSS_PER_CM,
            B_m=d['B_m_G'] * GAUSS,
            delta=d['delta'],
            phi0=math.radians(d['phi0_deg']),
            omega_m=TWO_PI * d['f_m_kHz'] * 1e3,
            B_rf=B_rf,
            omega_rf=TWO_PI * d['f_rf_MHz'] * 1e6,
            species=species,
            kappa=kappa,
            coupling=d.get('coupling', 'projected')
        )

    def to_lab(self) -> dict:
        return {
            'alpha_G_per_cm': self.alpha / GAUSS_PER_CM,
            'B_m_G': self.B_m / GAUSS,
            'delta': self.delta,
            'phi0_deg': math.degrees(self.phi0),
            'f_m_kHz': self.omega_m / TWO_PI / 1e3,
            'B_rf_G': self.B_rf / GAUSS,
            'f_rf_MHz': self.omega_rf / TWO_PI / 1e6,
            'species': self.species.name,
            'kappa': self.kappa,
            'coupling': self.coupling
        }


def quadrupole_field(alpha: float, r: Vec3) -> Vec3:
    """ alpha * (x, y, -2z) for one position or an array of positions (..., 3) """
    r = np.asarray(r, dtype=float)
    return alpha * r * np.array([1.0, 1.0, -2.0])


def instantaneous_field(config: FieldConfig, r: Vec3, theta_m: float | np.ndarray) -> Vec3:
    """
    Slow field at audio phase theta_m (RF excluded)
    :param config: Field configuration
    :param r: Position (3,) or positions (..., 3)
    :param theta_m: Audio phase, scalar or array broadcastable against r[..., 0]
    :return: Field in T, shape broadcast(r[..., 0], theta_m) + (3,)
    """
    s = np.sin(np.asarray(theta_m, dtype=float))[..., np.newaxis]
    return quadrupole_field(config.alpha, r) + config.B_m * s * config.modulation_axis


def field_magnitude(B: Vec3) -> np.ndarray:
    return np.linalg.norm(np.asarray(B), axis=-1)


def rf_coupling_from_field(config: FieldConfig, B: Vec3) -> np.ndarray:
    """ Coupling for precomputed slow fields (..., 3) """
    B = np.asarray(B, dtype=float)
    magnitude = field_magnitude(B)

    if np.any(magnitude < ZERO_FIELD_THRESHOLD):
        raise ZeroField(f'|B| below {ZERO_FIELD_THRESHOLD:g} T, quantization axis undefined')

    if config.coupling == 'uniform':
        fraction = np.ones_like(magnitude)
    else:
        # |B_hat x z_hat| for vertical RF polarization
        fraction = np.hypot(B[..., 0], B[..., 1]) / magnitude

    return config.Omega_rf * fraction


def rf_coupling(config: FieldConfig, r: Vec3, theta_m: float | np.ndarray) -> float | np.ndarray:
    """ Rabi frequency of the RF component perpendicular to the local slow field, rad/s """
    coupling = rf_coupling_from_field(config, instantaneous_field(config, r, theta_m))
    return coupling if np.ndim(coupling) else float(coupling)


def resonance_radius(config: FieldConfig) -> float:
    """ hbar omega_rf / (|g_F| mu_B alpha) """
    return HBAR * config.omega_rf / (config.species.magnetic_moment * config.alpha)
