import math
import logging
import dataclasses

import numpy as np

import taap_ring.potential as pt
import taap_ring.transport as tp

from taap_ring.constants import K_B, MICRON, hz, rad_per_s
from taap_ring.ensemble import sample_ring
from taap_ring.exception import ConfigError, TaapException
from taap_ring.field import FieldConfig
from taap_ring.formating import check_format_of_schedule
from taap_ring.imaging import DensityImage, RingFitResult, add_noise, fit_ring_image, render_image, residual_ring_power
from taap_ring.observables import flatness_from_fit, gravitational_height
from taap_ring.scenario import Scenario
from taap_ring.seeding import make_rng

logger = logging.getLogger(__name__)

EXTENT_WIDTHS = 10.0


def relative_deviation(value: float, reference: float) -> float | None:
    if reference == 0:
        return None
    return (value - reference) / reference


class TaapRing:
    def __init__(self, scenario: Scenario | FieldConfig):
        if isinstance(scenario, FieldConfig):
            scenario = Scenario(field_config=scenario)

        self.scenario = scenario
        self.config = scenario.field_config

    def analytics(self, radius: float | None = None) -> pt.RingAnalytics:
        """ Analytic ring for this field """
        return pt.analytic_ring(self.config, radius)

    def characterize(self) -> tuple[dict, pt.TrapCharacterization]:
        """ Return analytic and numeric ring side by side, plus the adiabaticity margins """

        opts = self.scenario.characterization
        char = pt.characterize_numeric(
            self.config,
            n_quad=opts.n_quad,
            n_phi=opts.n_phi,
            include_gravity=opts.include_gravity,
            workers=opts.workers
        )
        analytic = self.analytics(char.ring_radius)

        comparison = {}
        for name in ('omega_r', 'omega_z', 'omega_phi'):
            a, n = getattr(analytic, name), getattr(char, name)
            comparison[name] = {
                'analytic_Hz': hz(a),
                'numeric_Hz': hz(n),
                'relative_deviation': relative_deviation(n, a)
            }
        comparison['R'] = {
            'analytic_um': analytic.R_est / MICRON,
            'numeric_um': char.ring_radius / MICRON,
            'relative_deviation': relative_deviation(char.ring_radius, analytic.R_est)
        }

        try:
            adiabaticity = {'ok': True, **pt.adiabaticity_check(self.config, char)}
        except TaapException as e:
            logger.warning(e.ex_msg)
            adiabaticity = {'ok': False, 'message': e.ex_msg}

        summary = {
            'field': self.config.to_lab(),
            'analytic': analytic.summary(),
            'numeric': char.summary(),
            'comparison': comparison,
            'adiabaticity': adiabaticity,
            'gravitational_sag_um': pt.gravitational_sag(analytic) / MICRON
        }

        return summary, char

    def transport_ring(self) -> pt.RingAnalytics:
        """ Analytic ring used by the reduced model, with radius and omega_phi overrides applied """

        s = self.scenario.schedule or {}
        radius = s['ring_radius_um'] * MICRON if 'ring_radius_um' in s else None
        ring = self.analytics(radius)

        if 'omega_phi_hz' in s:
            ring = dataclasses.replace(ring, omega_phi=rad_per_s(s['omega_phi_hz']))

        if not ring.omega_phi > 0:
            raise ConfigError('Transport needs omega_phi > 0: set delta > 0 or schedule.omega_phi_hz')

        return ring

    def schedule(self, phi_ddot: float | None = None) -> tp.TransportSchedule:
        """ Build the transport schedule, optionally for another acceleration """

        s = self.scenario.schedule
        if s is None:
            raise ConfigError('Scenario has no schedule')

        problems = check_format_of_schedule(s)
        if problems:
            raise ConfigError(f'Invalid schedule: {", ".join(problems)}')

        ring = self.transport_ring()
        swept = phi_ddot is not None
        phi_ddot = phi_ddot if swept else s['phi_ddot']

        schedule = tp.TransportSchedule.bang_bang(
            phi_ddot=phi_ddot,
            t_accel=self._accel_time(s, phi_ddot, swept),
            omega_phi=ring.omega_phi,
            hold_time=s.get('hold_time', 0.0),
            omega_phi_table=s.get('omega_phi_table', ()),
            delta_ramp=s.get('delta_ramp', ()),
            jumps=s.get('jumps', 'auto') == 'auto',
            restoring=s.get('restoring', 'pendulum')
        )

        explicit = {k: s[k] for k in ('jump_start', 'jump_end') if k in s}
        if explicit:
            schedule = schedule.replace(**explicit)

        return schedule

    @staticmethod
    def _accel_time(s: dict, phi_ddot: float, swept: bool) -> float:
        """ t_accel, or omega_final / phi_ddot when the final speed is given instead """
        if 'omega_final' not in s:
            return s['t_accel']

        omega_final = s['omega_final']
        if phi_ddot == 0 or omega_final / phi_ddot < 0:
            raise ConfigError(f'omega_final {omega_final} cannot be reached with phi_ddot {phi_ddot}')

        t_accel = omega_final / phi_ddot

        # A sweep keeps the final speed and changes the ramp duration
        if 't_accel' in s and not swept and not math.isclose(s['t_accel'], t_accel, rel_tol=1e-9):
            raise ConfigError(f'omega_final {omega_final} != phi_ddot * t_accel = {phi_ddot * s["t_accel"]}')

        return t_accel

    def transport(self, phi_ddot: float | None = None, fit: bool = True) -> tuple[tp.Trajectory, dict]:
        """ Integrate the reduced azimuthal model; fit=False skips the hold-phase fit """

        s = self.scenario.schedule or {}
        schedule = self.schedule(phi_ddot)
        ring = self.transport_ring()
        restoring = s.get('restoring', 'pendulum')

        omega_max = max([ring.omega_phi, *(w for _, w in schedule.omega_phi_table)])
        dt = s.get('dt', 0.2 * tp.STEP_FRACTION / omega_max)

        state0 = tp.ParticleState(schedule.phi_start + s.get('phi_offset_mrad', 0.0) * 1e-3, 0.0)
        trajectory = tp.integrate_pendulum(schedule, ring, state0, dt, schedule.t_end, restoring,
                                           landscape=self.landscape(ring), sample_every=s.get('sample_every', 1))

        jump = tp.pendulum_jump if restoring == 'pendulum' else tp.bang_bang_jump
        report = {
            'phi_ddot': schedule.phi_ddot,
            't_accel': schedule.t_accel,
            'omega_final': schedule.omega_final,
            'final_phi_dot': trajectory.final.phi_dot,
            'jump_start': schedule.jump_start,
            'jump_end': schedule.jump_end,
            'omega_phi_Hz': hz(ring.omega_phi),
            'expected_lag': jump(schedule.phi_ddot, tp.omega_phi_at(schedule, ring, 0.0)),
            'sloshing_amplitude': tp.sloshing_amplitude(trajectory, schedule),
            'residual_amplitude': tp.residual_amplitude(trajectory, schedule, ring),
            'ramp_adiabaticity': tp.ramp_adiabaticity(schedule),
            'fit': self._fit_hold(trajectory, schedule) if fit else None
        }

        return trajectory, report

    def landscape(self, ring: pt.RingAnalytics) -> tp.AzimuthalLandscape | None:
        """ Lab-frame corrugation seen during transport, from the injected modulation at the ensemble temperature """
        m, spec = self.scenario.modulation, self.scenario.ensemble
        if m.is_flat or spec is None:
            return None
        return tp.AzimuthalLandscape.from_energy(m.h1, m.h2, m.phi1, m.phi2, K_B * spec.T, ring.species.mass, ring.radius)

    def _fit_hold(self, trajectory: tp.Trajectory, schedule: tp.TransportSchedule) -> tp.OscillationFit | None:
        """ Oscillation fit of the hold phase, None when the schedule has no hold """
        if schedule.hold_time == 0:
            logger.debug('No hold phase, skipping the oscillation fit')
            return None

        hold = trajectory.window(schedule.t_accel)
        omega = schedule.omega_final
        needed = 2 * 2 * math.pi / abs(omega) if omega != 0 else 0.0

        if len(hold) < 12 or hold.t[-1] - hold.t[0] < needed:
            raise ConfigError(f'hold_time {schedule.hold_time:g} s is too short for an oscillation fit, '
                              f'need 12 samples over at least {needed:g} s')

        return tp.fit_transport_trace(hold.t - schedule.t_accel, hold.phi, omega)

    def sweep(self) -> list[dict]:
        """ Run the transport for every acceleration in schedule.sweep_phi_ddot """

        values = (self.scenario.schedule or {}).get('sweep_phi_ddot', [])
        rows = []

        for phi_ddot in values:
            trajectory, report = self.transport(phi_ddot, fit=False)
            rows.append({k: report[k] for k in ('phi_ddot', 'jump_start', 'sloshing_amplitude', 'residual_amplitude',
                                                'final_phi_dot')})

        return rows

    def modulation_energy(self, phi: np.ndarray) -> np.ndarray:
        m = self.scenario.modulation
        T = self.scenario.ensemble.T
        return K_B * T * (m.h1 * np.cos(phi + m.phi1) + m.h2 * np.cos(2 * phi + m.phi2))

    def image(self) -> DensityImage:
        """ Sample the ensemble in the analytic ring and render its column density """

        spec, imaging = self.scenario.ensemble, self.scenario.imaging
        if spec is None or imaging is None:
            raise ConfigError('Imaging needs both an ensemble and an imaging section')

        ring = self.analytics()
        modulation = None if self.scenario.modulation.is_flat else self.modulation_energy
        positions = sample_ring(ring, spec, modulation)

        width = math.sqrt(K_B * spec.T / (ring.species.mass * ring.omega_r ** 2)) if spec.T > 0 else 0.0
        extent = imaging.extent or ring.radius + EXTENT_WIDTHS * width + imaging.psf * 4

        image = render_image(positions, imaging.pixel_size, extent, imaging.psf)

        if imaging.noise > 0:
            image = add_noise(image, imaging.noise * image.grid.max(), make_rng(self.scenario.seed, 'imaging'))

        return image

    def fit_image(self, image: DensityImage | None = None) -> tuple[RingFitResult, DensityImage, dict]:
        """ Fit the ring model and report flatness and residual harmonics """

        image = self.image() if image is None else image
        spec = self.scenario.ensemble
        imaging = self.scenario.imaging

        components = 'bimodal' if spec is not None and spec.N_bec > 0 else 'thermal'
        fit, residual = fit_ring_image(image, T_fit=1.0, fit_ellipticity=imaging.fit_ellipticity,
                                       components=components)

        report = {'residual_power': residual_ring_power(residual, fit)}
        if spec is not None and spec.T > 0:
            flatness = flatness_from_fit(fit, spec.T)
            report['flatness_nK'] = flatness / K_B * 1e9
            report['flatness_height_um'] = gravitational_height(flatness, self.config.species) / MICRON

        return fit, residual, report
