"""
Moving the ring: bang-bang acceleration schedules, the reduced azimuthal
dynamics of a cloud in the tilted ring, full 3-D integration in the numeric
potential, and the observables of a rigidly rotating cloud.
"""
import math
import logging
import dataclasses

from collections.abc import Iterator
from dataclasses import dataclass, field

import numpy as np

from scipy.optimize import least_squares
from scipy.signal import lombscargle

from taap_ring.constants import AtomSpecies, GRAVITY, HBAR, RB87, TWO_PI
from taap_ring.encoding import TRAJECTORY_DIGITS, write_csv
from taap_ring.exception import CentrifugalLimit, ConfigError, DomainError, FitDiverged, StepTooLarge
from taap_ring.field import FieldConfig, tilt_direction
from taap_ring.potential import RingAnalytics, TrapCharacterization, analytic_ring, taap_potential

logger = logging.getLogger(__name__)

RESTORING = ('pendulum', 'harmonic')
STEP_FRACTION = 0.05
GRADIENT_STEP = 1e-8

Breakpoints = tuple[tuple[float, float], ...]
Ring = RingAnalytics | TrapCharacterization


def _breakpoints(values) -> Breakpoints:
    return tuple((float(t), float(v)) for t, v in values)


def bang_bang_jump(phi_ddot: float, omega_phi: float) -> float:
    """ Forward jump that puts a cloud at rest on the equilibrium of a harmonic trap accelerating at phi_ddot """
    if not omega_phi > 0:
        raise DomainError(f'omega_phi must be positive, got {omega_phi}')
    return phi_ddot / omega_phi ** 2


def pendulum_jump(phi_ddot: float, omega_phi: float) -> float:
    """ Same as bang_bang_jump for the full sin restoring force """
    if not omega_phi > 0:
        raise DomainError(f'omega_phi must be positive, got {omega_phi}')

    ratio = phi_ddot / omega_phi ** 2
    if abs(ratio) > 1:
        raise DomainError(f'Acceleration {phi_ddot:g} rad/s^2 exceeds what the pendulum can hold')

    return math.asin(ratio)


@dataclass(frozen=True)
class TransportSchedule:
    phi_ddot: float
    t_accel: float
    omega_final: float | None = None
    jump_start: float = 0.0
    jump_end: float = 0.0
    delta_ramp: Breakpoints = ()
    hold_time: float = 0.0
    omega_phi_table: Breakpoints = ()
    phi_start: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'delta_ramp', _breakpoints(self.delta_ramp))
        object.__setattr__(self, 'omega_phi_table', _breakpoints(self.omega_phi_table))

        if not self.t_accel >= 0:
            raise ConfigError(f't_accel must be non-negative, got {self.t_accel}')
        if not self.hold_time >= 0:
            raise ConfigError(f'hold_time must be non-negative, got {self.hold_time}')
        if not all(math.isfinite(x) for x in (self.phi_ddot, self.jump_start, self.jump_end, self.phi_start)):
            raise ConfigError('Acceleration, jumps and start angle must be finite')

        reached = self.phi_ddot * self.t_accel
        if self.omega_final is None:
            object.__setattr__(self, 'omega_final', reached)
        elif self.t_accel > 0 and not math.isclose(self.omega_final, reached, rel_tol=1e-9, abs_tol=1e-12):
            raise ConfigError(f'omega_final {self.omega_final} != phi_ddot * t_accel = {reached}')

        for name in ('delta_ramp', 'omega_phi_table'):
            times = [t for t, _ in getattr(self, name)]
            if times != sorted(times):
                raise ConfigError(f'{name} breakpoints must be in time order')

        if any(not 0 <= d < 1 for _, d in self.delta_ramp):
            raise ConfigError('delta_ramp values must lie in [0, 1)')
        if any(w <= 0 for _, w in self.omega_phi_table):
            raise ConfigError('omega_phi_table values must be positive')

    @property
    def t_end(self) -> float:
        return self.t_accel + self.hold_time

    @property
    def jump_times(self) -> tuple[float, ...]:
        return (0.0, self.t_accel) if self.t_accel > 0 else (0.0,)

    def replace(self, **changes) -> 'TransportSchedule':
        return dataclasses.replace(self, **changes)

    @classmethod
    def static(cls, phi_trap: float = 0.0, hold_time: float = 0.0) -> 'TransportSchedule':
        return cls(phi_ddot=0.0, t_accel=0.0, hold_time=hold_time, phi_start=phi_trap)

    @classmethod
    def bang_bang(
            cls,
            phi_ddot: float,
            t_accel: float,
            omega_phi: float,
            hold_time: float = 0.0,
            omega_phi_table=(),
            delta_ramp=(),
            jumps: bool = True,
            restoring: str = 'harmonic',
            phi_start: float = 0.0) -> 'TransportSchedule':
        """
        Uniform acceleration with compensating jumps at start and stop
        :param phi_ddot: Angular acceleration in rad/s^2, negative to decelerate
        :param t_accel: Duration of the acceleration in s
        :param omega_phi: Azimuthal trap frequency used where no table is given
        :param hold_time: Constant-speed time after the acceleration
        :param omega_phi_table: Optional (t, omega_phi) breakpoints
        :param delta_ramp: Optional (t, delta) breakpoints
        :param jumps: False builds the uncompensated ramp
        :param restoring: 'harmonic' uses phi_ddot/omega^2, 'pendulum' its arcsin
        :param phi_start: Trap angle before the start
        :return: TransportSchedule
        """
        if restoring not in RESTORING:
            raise ConfigError(f'restoring must be one of {RESTORING}')

        table = _breakpoints(omega_phi_table)

        def omega_at(t):
            if table:
                return float(np.interp(t, [p[0] for p in table], [p[1] for p in table]))
            return omega_phi

        jump = pendulum_jump if restoring == 'pendulum' else bang_bang_jump
        jump_start = jump(phi_ddot, omega_at(0.0)) if jumps else 0.0
        jump_end = jump(phi_ddot, omega_at(t_accel)) if jumps else 0.0

        logger.debug('bang-bang jumps: start %.6g rad, end %.6g rad', jump_start, jump_end)

        return cls(
            phi_ddot=phi_ddot,
            t_accel=t_accel,
            jump_start=jump_start,
            jump_end=jump_end,
            delta_ramp=delta_ramp,
            hold_time=hold_time,
            omega_phi_table=table,
            phi_start=phi_start
        )


@dataclass(frozen=True)
class ParticleState:
    phi: float
    phi_dot: float

    def __post_init__(self):
        if not (math.isfinite(self.phi) and math.isfinite(self.phi_dot)):
            raise DomainError('Particle state must be finite')


@dataclass(frozen=True)
class CartesianState:
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'position', np.asarray(self.position, dtype=float))
        object.__setattr__(self, 'velocity', np.asarray(self.velocity, dtype=float))

        if self.position.shape != (3,) or self.velocity.shape != (3,):
            raise DomainError('Position and velocity must be 3-vectors')
        if not (np.all(np.isfinite(self.position)) and np.all(np.isfinite(self.velocity))):
            raise DomainError('Cartesian state must be finite')

    @property
    def phi(self) -> float:
        return math.atan2(self.position[1], self.position[0])

    @property
    def phi_dot(self) -> float:
        x, y, _ = self.position
        vx, vy, _ = self.velocity
        return (x * vy - y * vx) / (x * x + y * y)


@dataclass
class Trajectory:
    t: np.ndarray
    phi: np.ndarray
    phi_dot: np.ndarray

    def __len__(self):
        return len(self.t)

    def __iter__(self) -> Iterator[tuple[float, ParticleState]]:
        for t, phi, phi_dot in zip(self.t, self.phi, self.phi_dot):
            yield float(t), ParticleState(float(phi), float(phi_dot))

    @property
    def final(self) -> ParticleState:
        return ParticleState(float(self.phi[-1]), float(self.phi_dot[-1]))

    def window(self, t_from: float = -math.inf, t_to: float = math.inf) -> 'Trajectory':
        mask = (self.t >= t_from) & (self.t <= t_to)
        return Trajectory(self.t[mask], self.phi[mask], self.phi_dot[mask])

    def rows(self):
        return zip(self.t, self.phi, self.phi_dot)

    def save(self, path):
        return write_csv(path, ['t_s', 'phi_rad', 'phi_dot_rad_per_s'], self.rows(), TRAJECTORY_DIGITS)


@dataclass
class Trajectory3D:
    t: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray

    def azimuthal(self) -> Trajectory:
        x, y = self.positions[:, 0], self.positions[:, 1]
        vx, vy = self.velocities[:, 0], self.velocities[:, 1]
        phi = np.unwrap(np.arctan2(y, x))
        return Trajectory(self.t, phi, (x * vy - y * vx) / (x * x + y * y))


@dataclass(frozen=True)
class AzimuthalLandscape:
    """ Static lab-frame corrugation h1 cos(phi + phi1) + h2 cos(2 phi + phi2), strength in rad/s^2 """
    h1: float
    h2: float
    phi1: float
    phi2: float
    strength: float

    @classmethod
    def from_energy(cls, h1, h2, phi1, phi2, energy: float, mass: float, radius: float) -> 'AzimuthalLandscape':
        return cls(h1, h2, phi1, phi2, energy / (mass * radius ** 2))

    def acceleration(self, phi: float) -> float:
        return self.strength * (self.h1 * math.sin(phi + self.phi1) + 2 * self.h2 * math.sin(2 * phi + self.phi2))


@dataclass(frozen=True)
class OscillationFit:
    phi_offset: float
    a1: float
    a2: float
    a3: float
    phase1: float
    phase2: float
    phase3: float
    omega_fit: float
    tau: float
    omega_drive: float = 0.0
    residual_rms: float = 0.0
    stderr: dict = field(default_factory=dict)

    def __post_init__(self):
        if min(self.a1, self.a2, self.a3) < 0:
            raise DomainError('Oscillation amplitudes must be non-negative')
        if not self.tau > 0:
            raise DomainError('tau must be positive')

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d['tau'] = self.tau if math.isfinite(self.tau) else None
        return d


def _wrap(angle: float) -> float:
    """ Map into (-pi, pi] """
    wrapped = math.remainder(angle, TWO_PI)
    return math.pi if wrapped == -math.pi else wrapped


def trap_trajectory(schedule: TransportSchedule, t: float, side: str = 'right') -> tuple[float, float | None]:
    """
    Azimuth of the trap minimum and tilt at time t
    :param schedule: Transport schedule
    :param t: Time in s
    :param side: At a jump instant, 'left' gives the value just before it and 'right' just after
    :return: (phi_trap, delta), delta is None when the schedule has no delta ramp
    """
    if t < 0:
        raise DomainError(f't must be non-negative, got {t}')

    s = schedule
    t_a = s.t_accel

    if t == 0 and side == 'left':
        phi = s.phi_start
    elif t < t_a or (t == t_a and side == 'left' and t_a > 0):
        phi = s.phi_start + s.jump_start + 0.5 * s.phi_ddot * t ** 2
    else:
        phi = (s.phi_start + 0.5 * s.phi_ddot * t_a ** 2 + s.omega_final * (t - t_a)
               + s.jump_start - s.jump_end)

    delta = None
    if s.delta_ramp:
        delta = float(np.interp(t, [p[0] for p in s.delta_ramp], [p[1] for p in s.delta_ramp]))

    return phi, delta


def omega_phi_at(schedule: TransportSchedule, char: Ring, t: float) -> float:
    """ Azimuthal trap frequency: table first, then the delta ramp, then the ring itself """
    if schedule.omega_phi_table:
        table = schedule.omega_phi_table
        return float(np.interp(t, [p[0] for p in table], [p[1] for p in table]))

    if schedule.delta_ramp:
        _, delta = trap_trajectory(schedule, t)
        return math.sqrt(delta * GRAVITY / (2 * char.radius))

    return char.omega_phi


def _max_omega_phi(schedule: TransportSchedule, char: Ring) -> float:
    candidates = [char.omega_phi]

    if schedule.omega_phi_table:
        candidates = [w for _, w in schedule.omega_phi_table]
    elif schedule.delta_ramp:
        candidates = [math.sqrt(d * GRAVITY / (2 * char.radius)) for _, d in schedule.delta_ramp]

    return max(candidates)


def _segments(schedule: TransportSchedule, t_end: float) -> list[tuple[float, float]]:
    edges = sorted({0.0, t_end} | {t for t in schedule.jump_times if 0 < t < t_end})
    return list(zip(edges[:-1], edges[1:]))


def integrate_pendulum(
        schedule: TransportSchedule,
        char: Ring,
        state0: ParticleState,
        dt: float,
        t_end: float,
        restoring: str = 'pendulum',
        landscape: AzimuthalLandscape | None = None,
        sample_every: int = 1) -> Trajectory:
    """
    Kick-drift-kick leapfrog for phi'' = -omega_phi(t)^2 sin(phi - phi_trap(t)) plus an optional
    static landscape. Steps are split at the jump instants, so each jump acts exactly once.
    """
    if restoring not in RESTORING:
        raise ConfigError(f'restoring must be one of {RESTORING}')
    if not t_end >= 0:
        raise DomainError(f't_end must be non-negative, got {t_end}')

    omega_max = _max_omega_phi(schedule, char)
    if omega_max > 0 and not dt < STEP_FRACTION / omega_max:
        raise StepTooLarge(f'dt={dt:g} s must be below {STEP_FRACTION / omega_max:g} s')

    harmonic = restoring == 'harmonic'
    constant_omega = not (schedule.omega_phi_table or schedule.delta_ramp)
    omega_const_sq = char.omega_phi ** 2

    def acceleration(t, phi, side):
        phi_trap, _ = trap_trajectory(schedule, t, side)
        w2 = omega_const_sq if constant_omega else omega_phi_at(schedule, char, t) ** 2
        offset = phi - phi_trap
        a = -w2 * (offset if harmonic else math.sin(offset))
        if landscape is not None:
            a += landscape.acceleration(phi)
        return a

    phi, v = state0.phi, state0.phi_dot
    ts, phis, vs = [0.0], [phi], [v]
    step = 0

    for start, stop in _segments(schedule, t_end):
        n = max(1, math.ceil((stop - start) / dt - 1e-9))
        h = (stop - start) / n
        a = acceleration(start, phi, 'right')

        for i in range(n):
            t_next = stop if i == n - 1 else start + (i + 1) * h
            v += 0.5 * h * a
            phi += h * v
            a = acceleration(t_next, phi, 'left' if i == n - 1 else 'right')
            v += 0.5 * h * a
            step += 1

            if step % sample_every == 0 or (i == n - 1 and stop == t_end):
                ts.append(t_next)
                phis.append(phi)
                vs.append(v)

        logger.debug('segment [%.6g, %.6g] s in %d steps', start, stop, n)

    return Trajectory(np.array(ts), np.array(phis), np.array(vs))


def integrate_trajectory_3d(
        config: FieldConfig,
        schedule: TransportSchedule,
        state0: CartesianState,
        dt: float,
        t_end: float,
        n_quad: int = 32,
        include_gravity: bool = True,
        sample_every: int = 1) -> Trajectory3D:
    """ Velocity Verlet in the numeric time-averaged potential with the tilt driven by the schedule """
    analytics = analytic_ring(config)
    omega_max = max(analytics.omega_r, analytics.omega_z)
    if not dt < STEP_FRACTION / omega_max:
        raise StepTooLarge(f'dt={dt:g} s must be below {STEP_FRACTION / omega_max:g} s')

    mass = config.species.mass
    offsets = GRADIENT_STEP * np.vstack([np.eye(3), -np.eye(3)])

    def force(t, r, side):
        phi_trap, delta = trap_trajectory(schedule, t, side)
        changes = {'phi0': tilt_direction(phi_trap)}
        if delta is not None:
            changes['delta'] = delta
        U = taap_potential(config.replace(**changes), r + offsets, n_quad, include_gravity)
        return -(U[:3] - U[3:]) / (2 * GRADIENT_STEP)

    r, v = state0.position.copy(), state0.velocity.copy()
    ts, rs, vs = [0.0], [r.copy()], [v.copy()]
    step = 0

    for start, stop in _segments(schedule, t_end):
        n = max(1, math.ceil((stop - start) / dt - 1e-9))
        h = (stop - start) / n
        a = force(start, r, 'right') / mass

        for i in range(n):
            t_next = stop if i == n - 1 else start + (i + 1) * h
            v += 0.5 * h * a
            r += h * v
            a = force(t_next, r, 'left' if i == n - 1 else 'right') / mass
            v += 0.5 * h * a
            step += 1

            if step % sample_every == 0 or (i == n - 1 and stop == t_end):
                ts.append(t_next)
                rs.append(r.copy())
                vs.append(v.copy())

    logger.info('3-D integration finished after %d steps', step)
    return Trajectory3D(np.array(ts), np.array(rs), np.array(vs))


def centrifugal_radius(R0: float, Omega: float, omega_r: float) -> float:
    """ Equilibrium radius R0 / (1 - Omega^2 / omega_r^2) of a ring rotating at Omega """
    if abs(Omega) >= omega_r:
        raise CentrifugalLimit(f'|Omega|={abs(Omega):g} rad/s reaches omega_r={omega_r:g} rad/s')
    return R0 / (1 - (Omega / omega_r) ** 2)


def angular_momentum(R: float, phi_dot: float, species: AtomSpecies = RB87) -> float:
    """ m R^2 phi_dot in units of hbar """
    if not R > 0:
        raise DomainError(f'R must be positive, got {R}')
    return species.mass * R ** 2 * phi_dot / HBAR


def transport_distance(R: float, omega: float, t: float) -> float:
    return R * abs(omega) * t


def round_trips(distance: float, R: float) -> float:
    return distance / (TWO_PI * R)


def ramp_adiabaticity(schedule: TransportSchedule) -> float:
    """ Largest |d omega_phi / dt| / omega_phi^2 along the omega_phi table """
    table = schedule.omega_phi_table
    worst = 0.0

    for (t0, w0), (t1, w1) in zip(table[:-1], table[1:]):
        if t1 > t0:
            worst = max(worst, abs(w1 - w0) / (t1 - t0) / min(w0, w1) ** 2)

    return worst


def residual_amplitude(trajectory: Trajectory, schedule: TransportSchedule, char: Ring,
                       t_from: float | None = None) -> float:
    """ Largest energy amplitude of the deviation from the co-moving trap after t_from """
    t_from = schedule.t_accel if t_from is None else t_from
    amplitude = 0.0

    for t, state in trajectory.window(t_from):
        phi_trap, _ = trap_trajectory(schedule, t)
        speed = schedule.omega_final if t > schedule.t_accel else schedule.phi_ddot * t
        omega = omega_phi_at(schedule, char, t)
        offset = state.phi - phi_trap
        amplitude = max(amplitude, math.hypot(offset, (state.phi_dot - speed) / omega))

    return amplitude


def sloshing_amplitude(trajectory: Trajectory, schedule: TransportSchedule) -> float:
    """ Half the peak-to-peak deviation from the trap during the acceleration """
    lag = [state.phi - trap_trajectory(schedule, t)[0]
           for t, state in trajectory.window(0.0, schedule.t_accel) if t > 0]
    if not lag:
        return 0.0
    return 0.5 * (max(lag) - min(lag))


TRACE_PARAMETERS = ('phi_offset', 'a1', 'phase1', 'a2', 'phase2', 'a3', 'gamma', 'omega_fit', 'phase3')


def _trace_model(p: np.ndarray, t: np.ndarray, omega_drive: float) -> np.ndarray:
    phi_offset, a1, ph1, a2, ph2, a3, gamma, omega, ph3 = p
    return (phi_offset + omega_drive * t
            + a1 * np.sin(omega_drive * t + ph1)
            + a2 * np.sin(2 * omega_drive * t + ph2)
            + a3 * np.exp(-gamma * t) * np.sin(omega * t + ph3))


def synthesize_transport_trace(fit: OscillationFit, times, omega_drive: float | None = None) -> np.ndarray:
    """ Evaluate the oscillation model of a fit on the given times """
    omega_drive = fit.omega_drive if omega_drive is None else omega_drive
    gamma = 0.0 if math.isinf(fit.tau) else 1 / fit.tau
    p = np.array([fit.phi_offset, fit.a1, fit.phase1, fit.a2, fit.phase2, fit.a3, gamma, fit.omega_fit, fit.phase3])
    return _trace_model(p, np.asarray(times, dtype=float), omega_drive)


def _fourier_component(t: np.ndarray, r: np.ndarray, omega: float) -> tuple[float, float]:
    """ Amplitude and phase of r ~ a sin(omega t + phase) """
    c = 2 * np.mean(r * np.exp(-1j * omega * t))
    return float(abs(c)), float(np.angle(1j * c))


def fit_transport_trace(times, angles, omega_drive: float) -> OscillationFit:
    """
    Least-squares fit of phi0 + w_d t + a1 sin(w_d t + p1) + a2 sin(2 w_d t + p2) + a3 exp(-t/tau) sin(w t + p3)
    :param times: Sample times in s
    :param angles: Unwrapped cloud angles in rad
    :param omega_drive: Angular speed of the trap in rad/s
    :return: OscillationFit with standard errors
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(angles, dtype=float)
    span = float(t.max() - t.min()) if len(t) else 0.0

    if len(t) < 12:
        raise DomainError(f'Need at least 12 samples, got {len(t)}')
    if omega_drive != 0 and span < 2 * TWO_PI / abs(omega_drive):
        raise DomainError('Trace must span at least two drive periods')

    detrended = y - omega_drive * t
    offset = float(np.mean(detrended))
    r = detrended - offset

    a1, ph1 = _fourier_component(t, r, omega_drive)
    a2, ph2 = _fourier_component(t, r, 2 * omega_drive)
    rest = r - a1 * np.sin(omega_drive * t + ph1) - a2 * np.sin(2 * omega_drive * t + ph2)

    # Dominant free oscillation away from the drive harmonics
    nyquist = math.pi * (len(t) - 1) / span
    lowest = 2 * TWO_PI / span
    grid = np.linspace(lowest, nyquist, max(4096, int(10 * (nyquist - lowest) * span / TWO_PI)))
    power = lombscargle(t, rest, grid)
    if omega_drive != 0:
        for k in (1, 2):
            power[abs(grid - k * abs(omega_drive)) < 0.05 * abs(omega_drive)] = 0
    omega0 = float(grid[int(np.argmax(power))])
    a3, ph3 = _fourier_component(t, rest, omega0)

    p0 = np.array([offset, a1, ph1, a2, ph2, a3, 2 / span, omega0, ph3])
    lower = [-np.inf, 0, -np.inf, 0, -np.inf, 0, 0, 0, -np.inf]
    upper = [np.inf] * 9

    def residuals(p):
        return _trace_model(p, t, omega_drive) - y

    try:
        res = least_squares(residuals, p0, bounds=(lower, upper), x_scale='jac', max_nfev=4000)
    except ValueError as e:
        raise FitDiverged(e)

    if res.status <= 0 or not np.all(np.isfinite(res.x)):
        raise FitDiverged(f'Transport fit did not converge: {res.message}')

    dof = max(1, len(t) - len(p0))
    rms = float(np.sqrt(np.mean(res.fun ** 2)))
    cov = np.linalg.pinv(res.jac.T @ res.jac) * (2 * res.cost / dof)
    err = dict(zip(TRACE_PARAMETERS, np.sqrt(np.clip(np.diag(cov), 0, None))))

    phi_offset, a1, ph1, a2, ph2, a3, gamma, omega, ph3 = res.x
    tau = math.inf if gamma == 0 else 1 / gamma
    err['tau'] = err.pop('gamma') / gamma ** 2 if gamma > 0 else math.inf

    logger.info('Transport fit: a1=%.4g a2=%.4g a3=%.4g rad, rms %.3g rad', a1, a2, a3, rms)

    return OscillationFit(
        phi_offset=float(phi_offset),
        a1=float(a1),
        a2=float(a2),
        a3=float(a3),
        phase1=_wrap(ph1),
        phase2=_wrap(ph2),
        phase3=_wrap(ph3),
        omega_fit=float(omega),
        tau=tau,
        omega_drive=omega_drive,
        residual_rms=rms,
        stderr={k: float(v) for k, v in err.items()}
    )
