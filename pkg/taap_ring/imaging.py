"""
Synthetic column-density images of the ring and the bimodal ring model fitted to them.
"""
import math
import logging
import dataclasses

from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from scipy.ndimage import gaussian_filter
from scipy.optimize import least_squares

from taap_ring.constants import MICRON
from taap_ring.encoding import IMAGE_DIGITS, read_grid, read_json, write_grid, write_json
from taap_ring.exception import DomainError, FitDiverged, RingNotFound

logger = logging.getLogger(__name__)

COMPONENTS = ('auto', 'thermal', 'bimodal')
BOOTSTRAP_THRESHOLD = 0.2


@dataclass
class DensityImage:
    grid: np.ndarray
    pixel_size: float
    origin: tuple[float, float] = (0.0, 0.0)
    signed: bool = False

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.origin = (float(self.origin[0]), float(self.origin[1]))

        if self.grid.ndim != 2:
            raise DomainError('Image grid must be two-dimensional')
        if not self.pixel_size > 0:
            raise DomainError('pixel_size must be positive')
        if not self.signed and np.any(self.grid < 0):
            raise DomainError('Column density must be non-negative')

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """ Pixel-centre coordinates (X, Y), rows along y """
        n_rows, n_cols = self.grid.shape
        x = self.origin[0] + (np.arange(n_cols) + 0.5) * self.pixel_size
        y = self.origin[1] + (np.arange(n_rows) + 0.5) * self.pixel_size
        return np.meshgrid(x, y)

    def total(self) -> float:
        """ Number of atoms in the image """
        return float(self.grid.sum() * self.pixel_size ** 2)

    def like(self, grid: np.ndarray, signed: bool = False) -> 'DensityImage':
        return DensityImage(grid, self.pixel_size, self.origin, signed)

    def save(self, stem: str | Path) -> tuple[Path, Path]:
        """ Sidecar JSON with geometry plus the row-major grid as CSV """
        stem = Path(stem)
        meta = {
            'pixel_size_um': self.pixel_size / MICRON,
            'origin_um': [self.origin[0] / MICRON, self.origin[1] / MICRON],
            'n_rows': self.grid.shape[0],
            'n_cols': self.grid.shape[1]
        }
        return write_json(stem.with_suffix('.json'), meta), write_grid(stem.with_suffix('.csv'), self.grid,
                                                                       IMAGE_DIGITS)

    @classmethod
    def load(cls, stem: str | Path) -> 'DensityImage':
        stem = Path(stem)
        meta = read_json(stem.with_suffix('.json'))
        grid = read_grid(stem.with_suffix('.csv')).reshape(meta['n_rows'], meta['n_cols'])
        return cls(
            grid=grid,
            pixel_size=meta['pixel_size_um'] * MICRON,
            origin=(meta['origin_um'][0] * MICRON, meta['origin_um'][1] * MICRON),
            signed=bool(np.any(grid < 0))
        )


@dataclass
class RingFitResult:
    j0: float
    k0: float
    rho0: float
    delta_rho: float
    T_fit: float
    mu_fit: float
    h1: float
    h2: float
    phi1: float
    phi2: float
    residual_rms: float = 0.0
    x0: float = 0.0
    y0: float = 0.0
    epsilon: float = 0.0
    theta_eps: float = 0.0
    stderr: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.rho0 > 0 and self.delta_rho > 0):
            raise DomainError('rho0 and delta_rho must be positive')
        if min(self.h1, self.h2) < 0:
            raise DomainError('h1 and h2 must be non-negative')
        if not self.T_fit > 0:
            raise DomainError('T_fit must be positive')
        self.phi1 = wrap_phase(self.phi1)
        self.phi2 = wrap_phase(self.phi2)

    def replace(self, **changes) -> 'RingFitResult':
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def wrap_phase(angle: float) -> float:
    """ Map into (-pi, pi] """
    wrapped = math.remainder(angle, 2 * math.pi)
    return math.pi if wrapped == -math.pi else wrapped


def azimuthal_modulation(h1: float, h2: float, phi1: float, phi2: float, phi) -> np.ndarray:
    """ m(phi) = h1 cos(phi + phi1) + h2 cos(2 phi + phi2) """
    phi = np.asarray(phi, dtype=float)
    return h1 * np.cos(phi + phi1) + h2 * np.cos(2 * phi + phi2)


def pixel_grid(pixel_size: float, extent: float) -> DensityImage:
    """ Empty square image of half-width extent centred on the origin, odd pixel count """
    half = max(0, math.ceil(extent / pixel_size - 0.5))
    n = 2 * half + 1
    corner = -n * pixel_size / 2
    return DensityImage(np.zeros((n, n)), pixel_size, (corner, corner))


def render_image(
        source: np.ndarray | Callable[[np.ndarray, np.ndarray], np.ndarray],
        pixel_size: float,
        extent: float,
        psf: float = 0.0) -> DensityImage:
    """
    Column density on a square grid
    :param source: Positions (n, 2 or 3), z is integrated out, or a density callable f(X, Y)
    :param pixel_size: Pixel edge in m
    :param extent: Half-width of the field of view in m
    :param psf: Gaussian optical resolution sigma in m, 0 for none
    :return: DensityImage in atoms/m^2
    """
    image = pixel_grid(pixel_size, extent)
    n_rows, n_cols = image.shape

    if callable(source):
        X, Y = image.coordinates()
        grid = np.asarray(source(X, Y), dtype=float)
    else:
        positions = np.asarray(source, dtype=float)
        x_edges = image.origin[0] + np.arange(n_cols + 1) * pixel_size
        y_edges = image.origin[1] + np.arange(n_rows + 1) * pixel_size
        counts, _, _ = np.histogram2d(positions[:, 1], positions[:, 0], bins=[y_edges, x_edges])
        outside = len(positions) - counts.sum()
        if outside:
            logger.warning('%d atoms fell outside the field of view', outside)
        grid = counts / pixel_size ** 2

    if psf > 0:
        grid = gaussian_filter(grid, psf / pixel_size, mode='constant')

    return image.like(grid)


def add_noise(image: DensityImage, sigma: float, rng: np.random.Generator) -> DensityImage:
    """ Additive Gaussian noise of standard deviation sigma per pixel """
    return image.like(image.grid + rng.normal(0.0, sigma, image.shape), signed=True)


def _ring_coordinates(X, Y, x0, y0, epsilon, theta_eps):
    dx, dy = X - x0, Y - y0
    phi = np.arctan2(dy, dx)

    if epsilon == 0:
        return np.hypot(dx, dy), phi

    c, s = math.cos(theta_eps), math.sin(theta_eps)
    u, v = c * dx + s * dy, -s * dx + c * dy
    return np.sqrt((1 + epsilon) * u ** 2 + (1 - epsilon) * v ** 2), phi


def ring_model(fit: RingFitResult, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """ j0 exp(-U/T) + k0 max(0, 1 - U/mu)^(3/2) with U = ((rho - rho0)/delta_rho)^2 + 1 + m(phi) """
    rho, phi = _ring_coordinates(X, Y, fit.x0, fit.y0, fit.epsilon, fit.theta_eps)
    U = ((rho - fit.rho0) / fit.delta_rho) ** 2 + 1 + azimuthal_modulation(fit.h1, fit.h2, fit.phi1, fit.phi2, phi)

    od = fit.j0 * np.exp(-U / fit.T_fit)
    if fit.k0 > 0 and fit.mu_fit > 0:
        od = od + fit.k0 * np.clip(1 - U / fit.mu_fit, 0.0, None) ** 1.5

    return od


def synth_ring_od(fit: RingFitResult, grid: DensityImage) -> DensityImage:
    """ Evaluate the bimodal ring model on the pixels of grid """
    X, Y = grid.coordinates()
    return grid.like(ring_model(fit, X, Y))


def circle_fit(X: np.ndarray, Y: np.ndarray, w: np.ndarray) -> tuple[float, float]:
    """ Centre (a, b) of the weighted algebraic circle fit x^2 + y^2 = 2 a x + 2 b y + c """
    total = w.sum()
    cx, cy = (w * X).sum() / total, (w * Y).sum() / total
    u, v = X - cx, Y - cy
    s = float(np.sqrt((w * (u ** 2 + v ** 2)).sum() / total))

    u, v, sw = u / s, v / s, np.sqrt(w)
    A = np.column_stack([2 * u, 2 * v, np.ones_like(u)]) * sw[:, np.newaxis]
    (a, b, _), *_ = np.linalg.lstsq(A, (u ** 2 + v ** 2) * sw, rcond=None)

    return float(cx + a * s), float(cy + b * s)


def ring_bootstrap(image: DensityImage) -> tuple[float, float, float, float]:
    """
    Centre, radius and radial width of the annulus from the pixels above a threshold
    :param image: Image containing one ring
    :return: (x0, y0, rho0, delta_rho), delta_rho for an energy scale of 1
    """
    peak = image.grid.max()
    if not peak > 0:
        raise RingNotFound('Image has no positive column density')

    mask = image.grid > BOOTSTRAP_THRESHOLD * peak
    if mask.sum() < 3:
        raise RingNotFound(f'Only {mask.sum()} pixels above {BOOTSTRAP_THRESHOLD:g} of the peak')

    X, Y = image.coordinates()
    X, Y, w = X[mask], Y[mask], image.grid[mask]
    total = w.sum()

    x0, y0 = circle_fit(X, Y, w)
    rho = np.hypot(X - x0, Y - y0)
    rho0 = float((w * rho).sum() / total)
    spread = float(np.sqrt((w * (rho - rho0) ** 2).sum() / total))

    if not rho0 > 2 * spread or spread == 0:
        raise RingNotFound(f'No annulus: radius {rho0:.3g} m against radial spread {spread:.3g} m')

    return x0, y0, rho0, spread * math.sqrt(2)


def ring_radius_from_image(image: DensityImage) -> float:
    return ring_bootstrap(image)[2]


def azimuthal_profile(image: DensityImage, x0: float, y0: float, rho_in: float, rho_out: float,
                      bins: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """ Mean column density per azimuthal bin within an annulus """
    X, Y = image.coordinates()
    rho = np.hypot(X - x0, Y - y0)
    phi = np.arctan2(Y - y0, X - x0)
    inside = (rho >= rho_in) & (rho <= rho_out)

    sums, edges = np.histogram(phi[inside], bins=bins, range=(-math.pi, math.pi), weights=image.grid[inside])
    counts, _ = np.histogram(phi[inside], bins=bins, range=(-math.pi, math.pi))
    return sums / np.maximum(counts, 1), 0.5 * (edges[:-1] + edges[1:])


def harmonic(profile: np.ndarray, phi: np.ndarray, k: int) -> tuple[float, float]:
    """ (a, p) with profile ~ a cos(k phi + p) """
    c = np.mean(profile * np.exp(-1j * k * phi))
    return float(2 * abs(c)), float(np.angle(c))


def _unit(name: str, pixel_size: float, peak: float) -> float:
    if name in ('rho0', 'delta_rho', 'x0', 'y0'):
        return pixel_size
    if name in ('j0', 'k0'):
        return peak
    return 1.0


def _initial_guess(image: DensityImage, T_fit: float, bimodal: bool) -> RingFitResult:
    x0, y0, rho0, width = ring_bootstrap(image)
    delta_rho = width / math.sqrt(T_fit)

    profile, phi = azimuthal_profile(image, x0, y0, rho0 - width, rho0 + width)
    positive = profile > 0
    m = -T_fit * np.log(np.where(positive, profile, profile[positive].min() if positive.any() else 1.0))
    h1, phi1 = harmonic(m - m.mean(), phi, 1)
    h2, phi2 = harmonic(m - m.mean(), phi, 2)

    peak = float(image.grid.max())
    return RingFitResult(
        j0=peak * math.exp(1 / T_fit) * (0.5 if bimodal else 1.0),
        k0=0.5 * peak if bimodal else 0.0,
        rho0=rho0,
        delta_rho=delta_rho,
        T_fit=T_fit,
        mu_fit=1 + 2 * T_fit if bimodal else 0.0,
        h1=h1,
        h2=h2,
        phi1=phi1,
        phi2=phi2,
        x0=x0,
        y0=y0
    )


def fit_ring_image(
        image: DensityImage,
        init: RingFitResult | None = None,
        T_fit: float | None = None,
        fit_ellipticity: bool = False,
        components: str = 'auto') -> tuple[RingFitResult, DensityImage]:
    """
    Least-squares fit of the bimodal ring model. T_fit sets the energy scale and stays fixed.
    :param image: Column-density image
    :param init: Starting point, bootstrapped from image moments when omitted
    :param T_fit: Energy scale, defaults to init.T_fit or 1
    :param fit_ellipticity: Also fit epsilon and its axis
    :param components: 'thermal' holds k0 = 0, 'bimodal' fits k0 and mu, 'auto' follows init
    :return: Fit result with standard errors, and the residual image (data - model)
    """
    if components not in COMPONENTS:
        raise DomainError(f'components must be one of {COMPONENTS}')

    T_fit = T_fit or (init.T_fit if init is not None else 1.0)
    if components == 'auto':
        bimodal = init is not None and init.k0 > 0
    else:
        bimodal = components == 'bimodal'

    start = init.replace(T_fit=T_fit) if init is not None else _initial_guess(image, T_fit, bimodal)
    if bimodal and not start.mu_fit > 0:
        start = start.replace(k0=start.k0 or 0.5 * float(image.grid.max()), mu_fit=1 + 2 * T_fit)

    names = ['j0', 'rho0', 'delta_rho', 'h1', 'h2', 'phi1', 'phi2', 'x0', 'y0']
    lower = [0, 1e-6, 1e-6, 0, 0, -np.inf, -np.inf, -np.inf, -np.inf]
    if bimodal:
        names += ['k0', 'mu_fit']
        lower += [0, 0]
    if fit_ellipticity:
        names += ['epsilon', 'theta_eps']
        lower += [-0.5, -np.inf]

    upper = [np.inf] * len(names)
    if fit_ellipticity:
        upper[names.index('epsilon')] = 0.5

    # Work in pixels and units of the peak density
    peak = float(np.abs(image.grid).max()) or 1.0
    units = np.array([_unit(name, image.pixel_size, peak) for name in names])

    x_start = np.array([getattr(start, name) for name in names], dtype=float) / units
    x_start = np.clip(x_start, lower, upper)

    X, Y = image.coordinates()
    data = image.grid
    Xp, Yp, scaled = X / image.pixel_size, Y / image.pixel_size, data / peak

    def unpack(x):
        return dataclasses.replace(start, **{name: float(v) for name, v in zip(names, x)}, stderr={})

    def residuals(x):
        return (ring_model(unpack(x), Xp, Yp) - scaled).ravel()

    try:
        res = least_squares(residuals, x_start, bounds=(lower, upper), x_scale='jac', max_nfev=200 * len(names))
    except ValueError as e:
        raise FitDiverged(e)

    if res.status <= 0 or not np.all(np.isfinite(res.x)):
        raise FitDiverged(f'Ring fit did not converge: {res.message}')

    dof = max(1, data.size - len(names))
    cov = np.linalg.pinv(res.jac.T @ res.jac) * (2 * res.cost / dof)
    errors = np.sqrt(np.clip(np.diag(cov), 0, None)) * units

    fit = unpack(res.x * units).replace(
        residual_rms=float(peak * np.sqrt(np.mean(res.fun ** 2))),
        stderr={name: float(e) for name, e in zip(names, errors)}
    )
    if fit.epsilon < 0:
        fit = fit.replace(epsilon=-fit.epsilon, theta_eps=fit.theta_eps + math.pi / 2)
    if fit_ellipticity:
        fit = fit.replace(theta_eps=math.remainder(fit.theta_eps, math.pi))

    logger.info('Ring fit: rho0=%.2f um, h1=%.4f, h2=%.4f, rms %.3g', fit.rho0 / MICRON, fit.h1, fit.h2,
                fit.residual_rms)

    residual = image.like(data - ring_model(fit, X, Y), signed=True)
    return fit, residual


def residual_ring_power(residual: DensityImage, fit: RingFitResult, bins: int = 64) -> dict:
    """ First and second azimuthal harmonics of the residual along the ring and their noise floor """
    half_width = 2 * fit.delta_rho * math.sqrt(fit.T_fit)
    profile, phi = azimuthal_profile(residual, fit.x0, fit.y0, fit.rho0 - half_width, fit.rho0 + half_width, bins)

    return {
        'harmonic_1': harmonic(profile, phi, 1)[0],
        'harmonic_2': harmonic(profile, phi, 2)[0],
        'noise_floor': float(3 * np.std(profile) * math.sqrt(2 / bins))
    }
