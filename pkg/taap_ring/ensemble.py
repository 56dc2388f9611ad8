"""
Atomic ensembles in a trap: rejection sampling of Boltzmann and Thomas-Fermi
densities, thermal velocities, rigid rotation and ballistic expansion.
"""
import math
import logging

from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from scipy.optimize import minimize

from taap_ring.constants import AtomSpecies, GRAVITY, K_B, NANOKELVIN, RB87
from taap_ring.exception import ConfigError, DomainError, LowAcceptance
from taap_ring.formating import ENSEMBLE_REQUIRED, ENSEMBLE_RULES, check_format_of_config
from taap_ring.potential import RingAnalytics, ring_potential
from taap_ring.seeding import substreams

logger = logging.getLogger(__name__)

Potential = Callable[[np.ndarray], np.ndarray]
Weight = Callable[[np.ndarray], np.ndarray]

MIN_ACCEPTANCE = 1e-4
PILOT_SIZE = 20000
BATCH_SIZE = 8192
BOX_WIDTHS = 6.0


@dataclass(frozen=True)
class EnsembleSpec:
    N_thermal: int
    T: float
    N_bec: int = 0
    mu: float = 0.0
    seed: int = 0
    n_streams: int = 1
    workers: int = 1

    def __post_init__(self):
        if self.N_thermal < 0 or self.N_bec < 0:
            raise ConfigError('Atom numbers must be non-negative')
        if self.N_thermal > 0 and not self.T > 0:
            raise ConfigError('T must be positive when N_thermal > 0')
        if self.N_bec > 0 and not self.mu > 0:
            raise ConfigError('mu must be positive when N_bec > 0')
        if self.n_streams < 1 or self.workers < 1:
            raise ConfigError('n_streams and workers must be at least 1')

    @classmethod
    def from_lab(cls, d: dict) -> 'EnsembleSpec':
        problems = check_format_of_config(d, ENSEMBLE_RULES, ENSEMBLE_REQUIRED, 'ensemble')
        if problems:
            raise ConfigError(f'Invalid ensemble config: {", ".join(problems)}')

        return cls(
            N_thermal=d['N_thermal'],
            T=d['T_nK'] * NANOKELVIN,
            N_bec=d.get('N_bec', 0),
            mu=K_B * d.get('mu_nK', 0.0) * NANOKELVIN,
            seed=d.get('seed', 0),
            n_streams=d.get('n_streams', 1),
            workers=d.get('workers', 1)
        )


def _uniform(rng: np.random.Generator, box: np.ndarray, n: int) -> np.ndarray:
    return box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random((n, len(box)))


def lowest_energy(potential: Potential, box: np.ndarray, rng: np.random.Generator) -> float:
    """ Minimum of the potential over the box: best of a uniform pilot, polished by Nelder-Mead """
    pilot = _uniform(rng, box, PILOT_SIZE)
    values = potential(pilot)
    best = pilot[int(np.argmin(values))]

    def clipped(x):
        return float(potential(np.clip(x, box[:, 0], box[:, 1])[np.newaxis])[0])

    res = minimize(clipped, best, method='Nelder-Mead', options={'xatol': 1e-12, 'fatol': 0.0, 'maxiter': 4000})
    return min(float(values.min()), float(res.fun))


def _rejection_stream(
        potential: Potential,
        acceptance: Callable[[np.ndarray, float], np.ndarray],
        box: np.ndarray,
        n: int,
        u_min: float,
        rng: np.random.Generator,
        jacobian: Weight | None = None) -> np.ndarray:
    """ n accepted points of one stream; restarts if a point below u_min shows up """
    accepted, trials, count = [], 0, 0

    while count < n:
        points = _uniform(rng, box, BATCH_SIZE)
        U = potential(points)

        if U.min() < u_min:
            logger.warning('Found energy below the envelope minimum, restarting stream')
            u_min = float(U.min())
            accepted, trials, count = [], 0, 0
            continue

        p = acceptance(U, u_min)
        if jacobian is not None:
            p = p * jacobian(points)
        keep = rng.random(BATCH_SIZE) < p
        accepted.append(points[keep])
        count += int(keep.sum())
        trials += BATCH_SIZE

        if trials >= 16 * BATCH_SIZE and count / trials < MIN_ACCEPTANCE:
            raise LowAcceptance(f'Acceptance {count / trials:.2e} below {MIN_ACCEPTANCE:g}, bounding box too large')

    logger.debug('stream accepted %d of %d trials', count, trials)
    return np.concatenate(accepted)[:n]


def _sample(
        potential: Potential,
        acceptance: Callable[[np.ndarray, float], np.ndarray],
        N: int,
        seed: int | np.random.SeedSequence,
        box,
        u_min: float | None,
        n_streams: int,
        workers: int,
        stream: str,
        jacobian: Weight | None) -> np.ndarray:
    box = np.asarray(box, dtype=float)
    if box.ndim != 2 or box.shape[1] != 2 or np.any(box[:, 1] <= box[:, 0]):
        raise DomainError('box must be a (d, 2) array of increasing bounds')

    rngs = substreams(seed, stream, n_streams + 1)

    if N == 0:
        return np.empty((0, len(box)))

    if u_min is None:
        u_min = lowest_energy(potential, box, rngs[-1])

    counts = [N // n_streams + (i < N % n_streams) for i in range(n_streams)]

    def run(i):
        return _rejection_stream(potential, acceptance, box, counts[i], u_min, rngs[i], jacobian)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(n_streams)))
    else:
        parts = [run(i) for i in range(n_streams)]

    return np.concatenate(parts)


def sample_thermal(
        potential: Potential,
        T: float,
        N: int,
        seed: int | np.random.SeedSequence,
        box,
        u_min: float | None = None,
        n_streams: int = 1,
        workers: int = 1,
        jacobian: Weight | None = None) -> np.ndarray:
    """
    Positions drawn from exp(-U / k_B T) by rejection inside a bounding box
    :param potential: Vectorized map from positions (n, d) to energies in J
    :param T: Temperature in K
    :param N: Number of positions
    :param seed: Scenario seed or a seed sequence already derived for the ensemble stream
    :param box: (d, 2) lower and upper bounds
    :param u_min: Lowest energy in the box, found numerically when omitted
    :param n_streams: Independent random streams, merged in stream order
    :param workers: Threads running the streams, does not change the result
    :param jacobian: Optional volume factor in [0, 1] for curvilinear boxes
    :return: (N, d) positions
    """
    if not T > 0:
        raise DomainError(f'T must be positive, got {T}')

    kT = K_B * T

    def boltzmann(U, lowest):
        return np.exp(-(U - lowest) / kT)

    return _sample(potential, boltzmann, N, seed, box, u_min, n_streams, workers, 'ensemble', jacobian)


def sample_condensate(
        potential: Potential,
        mu: float,
        N: int,
        seed: int,
        box,
        u_min: float | None = None,
        n_streams: int = 1,
        workers: int = 1,
        jacobian: Weight | None = None,
        exponent: float = 1.0) -> np.ndarray:
    """
    Positions drawn from the Thomas-Fermi density max(0, 1 - (U - U_min) / mu) ** exponent.
    Exponent 1 is the 3-D profile, 1.5 its column density for in-plane sampling.
    """
    if not mu > 0:
        raise DomainError(f'mu must be positive, got {mu}')

    def thomas_fermi(U, lowest):
        return np.clip(1 - (U - lowest) / mu, 0.0, None) ** exponent

    return _sample(potential, thomas_fermi, N, seed, box, u_min, n_streams, workers, 'condensate', jacobian)


def ring_box(analytics: RingAnalytics, T: float, dims: int = 2, widths: float = BOX_WIDTHS) -> np.ndarray:
    """
    Cylindrical (rho, phi[, z]) box around the ring, `widths` thermal widths radially and
    vertically; the azimuthal range narrows around the trap minimum when the tilt dominates.
    """
    m, kT = analytics.species.mass, K_B * T
    sigma_r = math.sqrt(kT / (m * analytics.omega_r ** 2))
    R = analytics.radius

    tilt = analytics.delta * m * analytics.species.gravity * R / (2 * kT)
    half = math.pi if tilt < (2 * widths / math.pi) ** 2 else min(math.pi, 2 * widths / math.sqrt(tilt))

    box = [[max(0.0, R - widths * sigma_r), R + widths * sigma_r],
           [analytics.phi_trap - half, analytics.phi_trap + half]]

    if dims == 3:
        sigma_z = math.sqrt(kT / (m * analytics.omega_z ** 2))
        box.append([-widths * sigma_z, widths * sigma_z])

    return np.array(box)


def cylindrical_to_cartesian(points: np.ndarray) -> np.ndarray:
    rho, phi = points[:, 0], points[:, 1]
    xy = np.column_stack([rho * np.cos(phi), rho * np.sin(phi)])
    return np.column_stack([xy, points[:, 2]]) if points.shape[1] == 3 else xy


def _radial_jacobian(box: np.ndarray) -> Weight:
    rho_max = box[0, 1]

    def jacobian(points):
        return points[:, 0] / rho_max

    return jacobian


def sample_ring(
        analytics: RingAnalytics,
        spec: EnsembleSpec,
        modulation: Callable[[np.ndarray], np.ndarray] | None = None,
        dims: int = 2) -> np.ndarray:
    """
    Thermal plus condensed atoms in the analytic ring, Cartesian positions (n, dims).
    Sampling runs in cylindrical coordinates with acceptance scaled by rho / rho_max.
    """
    parts = []

    def ring_energy(points):
        return ring_potential(analytics, cylindrical_to_cartesian(points), modulation)

    if spec.N_thermal > 0:
        box = ring_box(analytics, spec.T, dims)
        parts.append(sample_thermal(ring_energy, spec.T, spec.N_thermal, spec.seed, box,
                                    n_streams=spec.n_streams, workers=spec.workers,
                                    jacobian=_radial_jacobian(box)))

    if spec.N_bec > 0:
        m = analytics.species.mass
        rho_width = math.sqrt(2 * spec.mu / (m * analytics.omega_r ** 2))
        tilt = 0.5 * analytics.delta * m * analytics.species.gravity * analytics.radius
        half = math.pi if tilt == 0 else min(math.pi, 1.2 * math.sqrt(2 * spec.mu / tilt))
        box = [[max(0.0, analytics.radius - 1.2 * rho_width), analytics.radius + 1.2 * rho_width],
               [analytics.phi_trap - half, analytics.phi_trap + half]]
        if dims == 3:
            z_width = math.sqrt(2 * spec.mu / (m * analytics.omega_z ** 2))
            box.append([-1.2 * z_width, 1.2 * z_width])
        box = np.array(box)
        parts.append(sample_condensate(ring_energy, spec.mu, spec.N_bec, spec.seed, box,
                                       n_streams=spec.n_streams, workers=spec.workers,
                                       jacobian=_radial_jacobian(box), exponent=1.5 if dims == 2 else 1.0))

    if not parts:
        return np.empty((0, dims))

    logger.info('Sampled %d thermal and %d condensed atoms', spec.N_thermal, spec.N_bec)
    return cylindrical_to_cartesian(np.concatenate(parts))


def thermal_velocities(n: int, T: float, rng: np.random.Generator, species: AtomSpecies = RB87,
                       dims: int = 3) -> np.ndarray:
    """ Maxwell-Boltzmann velocities, sigma = sqrt(k_B T / m) per axis """
    return rng.normal(0.0, math.sqrt(K_B * T / species.mass), size=(n, dims))


def rigid_rotation(positions: np.ndarray, Omega: float) -> np.ndarray:
    """ Velocities Omega z_hat x r """
    v = np.zeros_like(positions, dtype=float)
    v[:, 0] = -Omega * positions[:, 1]
    v[:, 1] = Omega * positions[:, 0]
    return v


def tof_expand(positions: np.ndarray, velocities: np.ndarray, t: float, gravity: bool = True) -> np.ndarray:
    """ Ballistic flight for time t, free fall along -z for 3-D positions """
    if t < 0:
        raise DomainError(f'Time of flight must be non-negative, got {t}')

    moved = np.asarray(positions, dtype=float) + np.asarray(velocities, dtype=float) * t
    if gravity and moved.shape[1] == 3:
        moved[:, 2] -= 0.5 * GRAVITY * t ** 2

    return moved


def azimuthal_histogram(positions: np.ndarray, bins: int = 64, center=(0.0, 0.0)) -> tuple[np.ndarray, np.ndarray]:
    """ Counts per azimuthal bin on [-pi, pi) and the bin centres """
    phi = np.arctan2(positions[:, 1] - center[1], positions[:, 0] - center[0])
    counts, edges = np.histogram(phi, bins=bins, range=(-math.pi, math.pi))
    return counts, 0.5 * (edges[:-1] + edges[1:])
