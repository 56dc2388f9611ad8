from dataclasses import dataclass

from scipy import constants

from taap_ring.exception import ConfigError, DomainError

HBAR = constants.hbar
K_B = constants.k
MU_B = constants.physical_constants['Bohr magneton'][0]
GRAVITY = constants.g
AMU = constants.physical_constants['atomic mass constant'][0]
BOHR_RADIUS = constants.physical_constants['Bohr radius'][0]

# Lab units
GAUSS = 1e-4
GAUSS_PER_CM = 1e-2
MICRON = 1e-6
MILLIMETER = 1e-3
NANOKELVIN = 1e-9
TWO_PI = 2 * constants.pi

# |B| below which the local quantization axis is undefined
ZERO_FIELD_THRESHOLD = 1e-12


def hz(omega: float) -> float:
    """ Angular frequency in rad/s to Hz """
    return omega / TWO_PI


def rad_per_s(f: float) -> float:
    """ Frequency in Hz to angular frequency in rad/s """
    return f * TWO_PI


@dataclass(frozen=True)
class AtomSpecies:
    name: str
    mass: float
    g_F: float
    m_F: float
    scattering_length: float

    def __post_init__(self):
        if self.mass <= 0:
            raise DomainError(f'{self.name}: mass must be positive')
        if self.g_F * self.m_F == 0:
            raise DomainError(f'{self.name}: |g_F m_F| must be non-zero for a trapped state')
        if self.scattering_length <= 0:
            raise DomainError(f'{self.name}: scattering length must be positive')

    @property
    def bohr_magneton(self) -> float:
        return MU_B

    @property
    def gravity(self) -> float:
        return GRAVITY

    @property
    def magnetic_moment(self) -> float:
        """ |g_F| mu_B in J/T """
        return abs(self.g_F) * MU_B


RB87 = AtomSpecies(
    name='Rb87',
    mass=86.909180527 * AMU,
    g_F=-0.5,
    m_F=-1.0,
    scattering_length=98.98 * BOHR_RADIUS
)

SPECIES = {
    RB87.name: RB87
}


def species_by_name(name: str) -> AtomSpecies:
    try:
        return SPECIES[name]
    except KeyError:
        raise ConfigError(f'Unknown species {name!r}, known: {", ".join(sorted(SPECIES))}')
