"""
RF-dressed adiabatic potential, its average over the audio modulation cycle, and
the ring it forms: analytic estimates and a numeric characterization.
"""
import math
import logging

from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from scipy.optimize import minimize_scalar

from taap_ring.constants import AtomSpecies, HBAR, MICRON, TWO_PI, hz
from taap_ring.exception import AdiabaticityViolation, DomainError, NoMinimum
from taap_ring.field import (
    FieldConfig,
    Vec3,
    field_magnitude,
    instantaneous_field,
    resonance_radius,
    rf_coupling_from_field
)

logger = logging.getLogger(__name__)

DEFAULT_N_QUAD = 64
DEFAULT_N_PHI = 32
HESSIAN_STEP = 0.5 * MICRON
POSITION_TOL = 1e-12
MAX_SWEEPS = 400
ADIABATIC_MARGIN = 10.0
SAG_WINDOW = 0.25


@dataclass(frozen=True)
class RingAnalytics:
    R_est: float
    omega_0: float
    beta_m: float
    omega_r: float
    omega_z: float
    omega_phi: float
    V_bottom: float
    Omega_rf: float
    delta: float
    phi_trap: float
    radius: float
    species: AtomSpecies

    def __post_init__(self):
        if min(self.omega_0, self.omega_r, self.omega_z, self.omega_phi) < 0:
            raise DomainError('Trap frequencies must be non-negative')
        if self.omega_r > self.omega_0 * (1 + 1e-12):
            raise DomainError('omega_r cannot exceed omega_0')

    @property
    def ring_radius(self) -> float:
        return self.radius

    def summary(self) -> dict:
        return {
            'R_est_um': self.R_est / MICRON,
            'R_um': self.radius / MICRON,
            'beta_m': self.beta_m,
            'omega_0_Hz': hz(self.omega_0),
            'omega_r_Hz': hz(self.omega_r),
            'omega_z_Hz': hz(self.omega_z),
            'omega_phi_Hz': hz(self.omega_phi),
            'Omega_rf_kHz': hz(self.Omega_rf) / 1e3,
            'V_bottom_J': self.V_bottom
        }


@dataclass(frozen=True)
class TrapCharacterization:
    ring_radius: float
    z_min: float
    phi_min: float
    omega_r_num: float
    omega_z_num: float
    omega_phi_num: float
    V_min: float
    azimuthal_profile: np.ndarray
    hessian_eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(3))
    include_gravity: bool = True
    gravity_mode: str = 'sagged'

    def __post_init__(self):
        if not self.ring_radius > 0:
            raise DomainError('ring_radius must be positive')

    # Names shared with RingAnalytics so either can drive the transport model
    @property
    def omega_r(self) -> float:
        return self.omega_r_num

    @property
    def omega_z(self) -> float:
        return self.omega_z_num

    @property
    def omega_phi(self) -> float:
        return self.omega_phi_num

    @property
    def radius(self) -> float:
        return self.ring_radius

    def profile_rows(self) -> list[tuple[float, float]]:
        return [(float(phi), float(v)) for phi, v in self.azimuthal_profile]

    def profile_flatness(self) -> float:
        """ Peak-to-peak of the azimuthal profile relative to its mean """
        v = self.azimuthal_profile[:, 1]
        return float(np.ptp(v) / abs(np.mean(v)))

    def summary(self) -> dict:
        return {
            'R_um': self.ring_radius / MICRON,
            'z_min_um': self.z_min / MICRON,
            'phi_min_rad': self.phi_min,
            'omega_r_Hz': hz(self.omega_r_num),
            'omega_z_Hz': hz(self.omega_z_num),
            'omega_phi_Hz': hz(self.omega_phi_num),
            'V_min_J': self.V_min,
            'profile_flatness': self.profile_flatness(),
            'include_gravity': self.include_gravity,
            'gravity_mode': self.gravity_mode
        }


def larmor_frequency(B: Vec3, species: AtomSpecies) -> float | np.ndarray:
    """ mu_B |g_F| |B| / hbar for one field or an array of fields (..., 3) """
    omega = species.magnetic_moment * field_magnitude(B) / HBAR
    return omega if np.ndim(omega) else float(omega)


def gravity_potential(config: FieldConfig, r: Vec3) -> np.ndarray:
    return config.species.mass * config.species.gravity * np.asarray(r, dtype=float)[..., 2]


def adiabatic_potential(
        config: FieldConfig,
        r: Vec3,
        theta_m: float | np.ndarray,
        include_gravity: bool = False) -> float | np.ndarray:
    """
    Upper dressed-state potential at one audio phase
    :param config: Field configuration
    :param r: Position (3,) or positions (..., 3)
    :param theta_m: Audio phase, broadcastable against r[..., 0]
    :param include_gravity: Add M g z
    :return: Potential energy in J
    """
    B = instantaneous_field(config, r, theta_m)
    detuning = larmor_frequency(B, config.species) - config.omega_rf
    coupling = rf_coupling_from_field(config, B)

    U = abs(config.species.m_F) * HBAR * np.hypot(detuning, coupling)

    if include_gravity:
        U = U + gravity_potential(config, r)

    return U if np.ndim(U) else float(U)


def taap_potential(
        config: FieldConfig,
        r: Vec3,
        n_quad: int = DEFAULT_N_QUAD,
        include_gravity: bool = False) -> float | np.ndarray:
    """ Average of the adiabatic potential over one audio period (periodic trapezoid rule) """
    if n_quad < 8:
        raise DomainError(f'n_quad must be at least 8, got {n_quad}')

    r = np.asarray(r, dtype=float)
    theta = TWO_PI * np.arange(n_quad) / n_quad
    theta = theta.reshape((n_quad,) + (1,) * (r.ndim - 1))

    U = np.mean(adiabatic_potential(config, r, theta), axis=0)

    if include_gravity:
        U = U + gravity_potential(config, r)

    return U if np.ndim(U) else float(U)


def analytic_ring(config: FieldConfig, radius: float | None = None) -> RingAnalytics:
    """
    Ring radius and trap frequencies in the harmonic-dressing limit
    :param config: Field configuration
    :param radius: Ring radius for the pendulum frequency, defaults to R_est
    :return: RingAnalytics
    """
    species = config.species
    Omega = config.Omega_rf

    beta = species.magnetic_moment * config.B_m / (HBAR * config.omega_rf)
    omega_0 = abs(species.m_F * species.g_F) * species.bohr_magneton * config.alpha / math.sqrt(
        species.mass * HBAR * Omega)

    omega_r = omega_0 * (1 + beta ** 2) ** -0.25
    omega_z = 2 * omega_0 * math.sqrt(1 - (1 + beta ** 2) ** -0.5)

    R_est = resonance_radius(config)
    R = R_est if radius is None else radius

    if R <= 0:
        raise DomainError(f'Ring radius must be positive, got {R}')

    return RingAnalytics(
        R_est=R_est,
        omega_0=omega_0,
        beta_m=beta,
        omega_r=omega_r,
        omega_z=omega_z,
        omega_phi=math.sqrt(config.delta * species.gravity / (2 * R)),
        V_bottom=abs(species.m_F) * HBAR * Omega,
        Omega_rf=Omega,
        delta=config.delta,
        phi_trap=config.phi_trap,
        radius=R,
        species=species
    )


def gravitational_sag(analytics: RingAnalytics) -> float:
    """ g / omega_z^2, how far gravity pulls a harmonic ring below its field-free height """
    if analytics.omega_z == 0:
        return math.inf
    return analytics.species.gravity / analytics.omega_z ** 2


def ring_potential(
        analytics: RingAnalytics,
        positions: np.ndarray,
        modulation: Callable[[np.ndarray], np.ndarray] | None = None,
        phi_trap: float | None = None) -> np.ndarray:
    """
    Analytic ring potential: bottom, harmonic radial and vertical confinement and the
    gravitational pendulum term -(delta/2) m g R cos(phi - phi_trap).

    Positions with two columns are taken in the plane z = 0.
    """
    p = np.asarray(positions, dtype=float)
    m = analytics.species.mass
    R = analytics.radius
    phi_trap = analytics.phi_trap if phi_trap is None else phi_trap

    rho = np.hypot(p[..., 0], p[..., 1])
    phi = np.arctan2(p[..., 1], p[..., 0])

    V = (analytics.V_bottom
         + 0.5 * m * analytics.omega_r ** 2 * (rho - R) ** 2
         - 0.5 * analytics.delta * m * analytics.species.gravity * R * np.cos(phi - phi_trap))

    if p.shape[-1] == 3:
        V = V + 0.5 * m * analytics.omega_z ** 2 * p[..., 2] ** 2

    if modulation is not None:
        V = V + modulation(phi)

    return V


def _cylinder_point(r: float, z: float, phi: float) -> np.ndarray:
    return np.array([r * math.cos(phi), r * math.sin(phi), z])


def _line_minimize(fn, x, f, direction, width, xtol):
    """ Bounded scalar search along direction, widening the window while the optimum sits on its edge """
    def along(t):
        return fn(x + t * direction)

    lo, hi = -width, width

    for _ in range(40):
        res = minimize_scalar(along, bounds=(lo, hi), method='bounded', options={'xatol': xtol})
        span = hi - lo
        if res.x > hi - 0.01 * span:
            lo, hi = res.x - span, res.x + 2 * span
        elif res.x < lo + 0.01 * span:
            lo, hi = res.x - 2 * span, res.x + span
        else:
            break

    if res.fun < f:
        return x + res.x * direction, float(res.fun), float(res.x)
    return x, f, 0.0


def minimize_half_plane(
        fn: Callable[[np.ndarray], float],
        start: tuple[float, float],
        scale: float,
        xtol: float = POSITION_TOL,
        max_sweeps: int = MAX_SWEEPS,
        domain: tuple[float, float, float, float] | None = None) -> tuple[np.ndarray, float]:
    """
    Coordinate descent on (r, z) with a pattern move along each sweep's net step
    :param fn: Potential as a function of (r, z)
    :param start: Initial (r, z)
    :param scale: Length scale of the trap, sets search windows and the default domain
    :param xtol: Position tolerance in m
    :param max_sweeps: Iteration budget
    :param domain: Box (r_lo, r_hi, z_lo, z_hi) the minimum must stay inside
    :return: Minimum location and value
    """
    r_lo, r_hi, z_lo, z_hi = domain or (0.05 * scale, 3 * scale, -2 * scale, 2 * scale)

    x = np.array(start, dtype=float)
    f = fn(x)
    windows = np.full(2, 0.05 * scale)
    axes = np.eye(2)

    for sweep in range(max_sweeps):
        x_old, f_old = x.copy(), f

        for axis in range(2):
            x, f, moved = _line_minimize(fn, x, f, axes[axis], windows[axis], xtol)
            windows[axis] = max(4 * abs(moved), 1e-4 * scale)

        step = x - x_old
        length = float(np.linalg.norm(step))
        if length > 0:
            x, f, _ = _line_minimize(fn, x, f, step / length, 2 * length, xtol)

        if not (r_lo < x[0] < r_hi and z_lo < x[1] < z_hi):
            raise NoMinimum(f'Minimum search left the domain at r={x[0]:.6g} m, z={x[1]:.6g} m')

        logger.debug('sweep %d: r=%.12g z=%.12g V=%.15g', sweep, x[0], x[1], f)

        if np.linalg.norm(x - x_old) < xtol or f_old - f <= 1e-15 * abs(f):
            return x, f

    raise NoMinimum(f'No convergence within {max_sweeps} sweeps')


def hessian(fn: Callable[[np.ndarray], np.ndarray], center: np.ndarray, basis: np.ndarray, h: float) -> np.ndarray:
    """ Central-difference Hessian of a vectorized fn at center along the rows of basis """
    n = len(basis)
    offsets = [np.zeros(3)]

    for i in range(n):
        offsets += [h * basis[i], -h * basis[i]]
    for i in range(n):
        for j in range(i + 1, n):
            offsets += [h * (basis[i] + basis[j]), h * (basis[i] - basis[j]),
                        h * (-basis[i] + basis[j]), -h * (basis[i] + basis[j])]

    values = fn(center + np.array(offsets))
    f0 = values[0]
    H = np.zeros((n, n))

    for i in range(n):
        H[i, i] = (values[1 + 2 * i] - 2 * f0 + values[2 + 2 * i]) / h ** 2

    k = 1 + 2 * n
    for i in range(n):
        for j in range(i + 1, n):
            fpp, fpm, fmp, fmm = values[k:k + 4]
            H[i, j] = H[j, i] = (fpp - fpm - fmp + fmm) / (4 * h ** 2)
            k += 4

    return H


def _frequencies_from_hessian(H: np.ndarray, mass: float) -> tuple[float, float, float, np.ndarray]:
    eigenvalues, vectors = np.linalg.eigh(H)
    eigenvalues = _clip_eigenvalues(eigenvalues)

    # Basis order is (radial, azimuthal, vertical)
    tangential = int(np.argmax(abs(vectors[1])))
    rest = [i for i in range(3) if i != tangential]
    radial = max(rest, key=lambda i: abs(vectors[0, i]))
    vertical = rest[0] if rest[1] == radial else rest[1]

    def omega(i):
        return math.sqrt(eigenvalues[i] / mass)

    return omega(radial), omega(vertical), omega(tangential), eigenvalues


def _clip_eigenvalues(eigenvalues: np.ndarray) -> np.ndarray:
    scale = max(abs(eigenvalues).max(), 1e-300)

    for i, value in enumerate(eigenvalues):
        if value < 0:
            if abs(value) > 1e-6 * scale:
                raise NoMinimum(f'Hessian not positive semi-definite, eigenvalue {value:.3g}')
            logger.warning('Clipping negative Hessian eigenvalue %.3g to zero', value)
            eigenvalues[i] = 0.0

    return eigenvalues


def trigonometric_interpolant(values: np.ndarray) -> Callable[[float, int], float]:
    """
    Periodic interpolant through samples on an even azimuth grid
    :param values: Samples at phi_j = 2 pi j / n
    :return: f(phi, order) giving the interpolant or its derivative of that order
    """
    n = len(values)
    coeffs = np.fft.rfft(values) / n
    k = np.arange(len(coeffs))
    weights = np.where((k == 0) | ((n % 2 == 0) & (k == n // 2)), 1.0, 2.0)

    def interpolant(phi: float, order: int = 0) -> float:
        factor = (1j * k) ** order if order else 1.0
        return float(np.real(np.sum(weights * coeffs * factor * np.exp(1j * k * phi))))

    return interpolant


class _RingSearch:
    """ Minimum searches of one TAAP potential, with and without gravity """

    def __init__(self, config: FieldConfig, n_quad: int, workers: int, xtol: float, max_sweeps: int):
        self.config = config
        self.n_quad = n_quad
        self.workers = workers
        self.xtol = xtol
        self.max_sweeps = max_sweeps
        self.scale = resonance_radius(config)
        self.mass = config.species.mass

    def potential(self, points: np.ndarray, gravity: bool = False) -> np.ndarray:
        return taap_potential(self.config, points, self.n_quad, gravity)

    def window(self, x: np.ndarray) -> tuple[float, float, float, float]:
        w = SAG_WINDOW * self.scale
        return x[0] - w, x[0] + w, x[1] - w, x[1] + w

    def minimum_at(self, phi: float, start=None, gravity: bool = False, domain=None) -> tuple[np.ndarray, float]:
        start = (self.scale, 0.0) if start is None else tuple(start)
        return minimize_half_plane(lambda p: self.potential(_cylinder_point(p[0], p[1], phi), gravity), start,
                                   self.scale, self.xtol, self.max_sweeps, domain)

    def map(self, fn, *iterables) -> list:
        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                return list(pool.map(fn, *iterables))
        return list(map(fn, *iterables))

    def valley(self, phis: np.ndarray) -> list[tuple[np.ndarray, float]]:
        return self.map(self.minimum_at, phis)

    def sagged(self, phis: np.ndarray, valley: list) -> list[tuple[np.ndarray, float]]:
        """ Gravity-on minima, each confined to a window around its valley point """
        g = self.config.species.gravity
        k = int(np.argmin([f + self.mass * g * x[1] for x, f in valley]))
        lowest = self.minimum_at(phis[k], valley[k][0], True, self.window(valley[k][0]))
        logger.debug('Sagged minimum at phi=%.4f rad, z=%.3f um', phis[k], lowest[0][1] / MICRON)

        return self.map(lambda phi, x: self.minimum_at(phi, x, True, self.window(x)), phis, [x for x, _ in valley])

    def descend(self, phis: np.ndarray, results: list, gravity: bool, mode: str) -> TrapCharacterization:
        """ Refine the lowest azimuth and read all three frequencies off the 3D Hessian """
        values = np.array([f for _, f in results])
        profile = np.column_stack([phis, values])
        k = int(np.argmin(values))
        x_best, f_best, phi_best = results[k][0], values[k], phis[k]
        domain = self.window(x_best) if gravity else None

        if len(phis) > 2 and np.ptp(values) > 1e-12 * abs(f_best):
            spacing = TWO_PI / len(phis)
            start = tuple(x_best)
            cache = {}

            def along_ring(phi):
                cache[phi] = self.minimum_at(phi, start, gravity, domain)
                return cache[phi][1]

            res = minimize_scalar(along_ring, bounds=(phi_best - spacing, phi_best + spacing), method='bounded',
                                  options={'xatol': 1e-7})
            if res.fun < f_best:
                phi_best = float(res.x)
                x_best, f_best = cache[res.x]

        r_min, z_min = x_best
        center = _cylinder_point(r_min, z_min, phi_best)
        basis = np.array([
            [math.cos(phi_best), math.sin(phi_best), 0.0],
            [-math.sin(phi_best), math.cos(phi_best), 0.0],
            [0.0, 0.0, 1.0]
        ])

        H = hessian(lambda p: self.potential(p, gravity), center, basis, HESSIAN_STEP)
        omega_r, omega_z, omega_phi, eigenvalues = _frequencies_from_hessian(H, self.mass)

        return TrapCharacterization(
            ring_radius=float(r_min),
            z_min=float(z_min),
            phi_min=float(phi_best % TWO_PI),
            omega_r_num=omega_r,
            omega_z_num=omega_z,
            omega_phi_num=omega_phi,
            V_min=float(f_best),
            azimuthal_profile=profile,
            hessian_eigenvalues=eigenvalues,
            include_gravity=gravity,
            gravity_mode=mode
        )

    def first_order(self, phis: np.ndarray, valley: list) -> TrapCharacterization:
        """
        Gravity as M g z evaluated on the gravity-free valley. The azimuthal
        frequency comes from the curvature of that profile along the ring, the
        radial and vertical ones from the gravity-free Hessian across it.
        """
        n = len(phis)
        if n < 3:
            raise DomainError(f'First-order gravity needs n_phi >= 3, got {n}')

        g = self.config.species.gravity
        values = np.array([f + self.mass * g * x[1] for x, f in valley])
        interpolant = trigonometric_interpolant(values)

        k = int(np.argmin(values))
        spacing = TWO_PI / n
        res = minimize_scalar(interpolant, bounds=(phis[k] - spacing, phis[k] + spacing), method='bounded',
                              options={'xatol': 1e-9})
        phi_best = float(res.x)

        x, f0 = self.minimum_at(phi_best, valley[k][0])
        r_min, z_min = x

        curvature = interpolant(phi_best, 2)
        if curvature < 0:
            logger.warning('Negative azimuthal curvature %.3g J at the profile minimum, omega_phi set to 0', curvature)
        k_phi = max(curvature, 0.0) / r_min ** 2

        basis = np.array([
            [math.cos(phi_best), math.sin(phi_best), 0.0],
            [0.0, 0.0, 1.0]
        ])
        H = hessian(self.potential, _cylinder_point(r_min, z_min, phi_best), basis, HESSIAN_STEP)
        eigenvalues, vectors = np.linalg.eigh(H)
        eigenvalues = _clip_eigenvalues(eigenvalues)
        radial = int(np.argmax(abs(vectors[0])))
        vertical = 1 - radial

        return TrapCharacterization(
            ring_radius=float(r_min),
            z_min=float(z_min),
            phi_min=phi_best % TWO_PI,
            omega_r_num=math.sqrt(eigenvalues[radial] / self.mass),
            omega_z_num=math.sqrt(eigenvalues[vertical] / self.mass),
            omega_phi_num=math.sqrt(k_phi / self.mass),
            V_min=float(f0 + self.mass * g * z_min),
            azimuthal_profile=np.column_stack([phis, values]),
            hessian_eigenvalues=np.sort(np.append(eigenvalues, k_phi)),
            include_gravity=True,
            gravity_mode='first_order'
        )


def characterize_numeric(
        config: FieldConfig,
        n_quad: int = DEFAULT_N_QUAD,
        n_phi: int = DEFAULT_N_PHI,
        include_gravity: bool = True,
        workers: int = 1,
        xtol: float = POSITION_TOL,
        max_sweeps: int = MAX_SWEEPS) -> TrapCharacterization:
    """
    Locate the ring minimum in the (r, z) half-plane at n_phi azimuths, refine the
    azimuth of the global minimum and read trap frequencies off the Hessian there.

    With gravity the search starts from the gravity-free valley and looks for a
    sagged minimum within SAG_WINDOW ring radii of it. When the sag exceeds what
    the shell can hold there is no such minimum; gravity is then taken to first
    order on the valley (gravity_mode 'first_order') and a warning is logged.
    """
    search = _RingSearch(config, n_quad, workers, xtol, max_sweeps)
    phis = TWO_PI * np.arange(n_phi) / n_phi
    valley = search.valley(phis)

    if not include_gravity:
        char = search.descend(phis, valley, False, 'off')
    else:
        try:
            char = search.descend(phis, search.sagged(phis, valley), True, 'sagged')
        except NoMinimum as e:
            logger.warning('No sagged ring minimum (%s), using gravity to first order on the valley', e.ex_msg)
            char = search.first_order(phis, valley)

    logger.info('Ring minimum at r=%.3f um, z=%.3f um, phi=%.4f rad (gravity %s)', char.ring_radius / MICRON,
                char.z_min / MICRON, char.phi_min, char.gravity_mode)

    return char


def min_larmor_on_ring(config: FieldConfig, radius: float, z: float = 0.0, n_phi: int = 16,
                       n_quad: int = DEFAULT_N_QUAD) -> float:
    """ Smallest Larmor frequency met by an atom sitting on the ring over one audio period """
    phis = TWO_PI * np.arange(n_phi) / n_phi
    points = np.column_stack([radius * np.cos(phis), radius * np.sin(phis), np.full(n_phi, z)])
    theta = (TWO_PI * np.arange(n_quad) / n_quad)[:, np.newaxis]
    return float(np.min(larmor_frequency(instantaneous_field(config, points, theta), config.species)))


def adiabaticity_check(
        config: FieldConfig,
        char: TrapCharacterization | RingAnalytics,
        margin: float = ADIABATIC_MARGIN) -> dict:
    """
    Check omega_r, omega_z << omega_m << min Larmor frequency on the ring
    :param config: Field configuration
    :param char: Numeric or analytic ring description
    :param margin: Ratio that counts as "much less than"
    :return: The three margins as ratios
    """
    z = getattr(char, 'z_min', 0.0)
    larmor_min = min_larmor_on_ring(config, char.radius, z)

    report = {
        'omega_m_over_omega_r': config.omega_m / char.omega_r if char.omega_r > 0 else math.inf,
        'omega_m_over_omega_z': config.omega_m / char.omega_z if char.omega_z > 0 else math.inf,
        'larmor_min_over_omega_m': larmor_min / config.omega_m
    }

    failing = [name for name, ratio in report.items() if ratio < margin]
    if failing:
        raise AdiabaticityViolation(f'Ratios below {margin:g}: ' + ', '.join(
            f'{name}={report[name]:.3g}' for name in failing))

    return report
