"""
Scenario files: one JSON document describing the field, and optionally a
transport schedule, an ensemble, imaging and characterization settings.
"""
import json
import math
import logging

from dataclasses import dataclass, field
from pathlib import Path

from taap_ring.constants import MICRON
from taap_ring.ensemble import EnsembleSpec
from taap_ring.exception import ConfigError
from taap_ring.field import FieldConfig
from taap_ring.formating import check_format_of_scenario

logger = logging.getLogger(__name__)

DEFAULT_OUTPUTS = 'out'


@dataclass(frozen=True)
class ImagingSpec:
    pixel_size: float
    extent: float | None = None
    psf: float = 0.0
    noise: float = 0.0
    fit_ellipticity: bool = False

    @classmethod
    def from_lab(cls, d: dict) -> 'ImagingSpec':
        return cls(
            pixel_size=d['pixel_size_um'] * MICRON,
            extent=d['extent_um'] * MICRON if 'extent_um' in d else None,
            psf=d.get('psf_um', 0.0) * MICRON,
            noise=d.get('noise', 0.0),
            fit_ellipticity=d.get('fit_ellipticity', False)
        )


@dataclass(frozen=True)
class CharacterizationSpec:
    n_quad: int = 64
    n_phi: int = 32
    include_gravity: bool = True
    workers: int = 1


@dataclass(frozen=True)
class Modulation:
    """ Injected azimuthal landscape h1 cos(phi + phi1) + h2 cos(2 phi + phi2) in units of k_B T """
    h1: float = 0.0
    h2: float = 0.0
    phi1: float = 0.0
    phi2: float = 0.0

    @property
    def is_flat(self) -> bool:
        return self.h1 == 0 and self.h2 == 0

    @classmethod
    def from_lab(cls, d: dict) -> 'Modulation':
        return cls(
            h1=d.get('h1', 0.0),
            h2=d.get('h2', 0.0),
            phi1=math.radians(d.get('phi1_deg', 0.0)),
            phi2=math.radians(d.get('phi2_deg', 0.0))
        )


@dataclass(frozen=True)
class Scenario:
    field_config: FieldConfig
    schedule: dict | None = None
    ensemble: EnsembleSpec | None = None
    modulation: Modulation = field(default_factory=Modulation)
    imaging: ImagingSpec | None = None
    characterization: CharacterizationSpec = field(default_factory=CharacterizationSpec)
    outputs: Path = Path(DEFAULT_OUTPUTS)
    seed: int = 0

    def with_overrides(self, seed: int | None = None, outputs: str | Path | None = None) -> 'Scenario':
        changes = {}
        if seed is not None:
            changes['seed'] = seed
            if self.ensemble is not None:
                changes['ensemble'] = EnsembleSpec(**{**self.ensemble.__dict__, 'seed': seed})
        if outputs is not None:
            changes['outputs'] = Path(outputs)
        return Scenario(**{**self.__dict__, **changes})

    @classmethod
    def from_dict(cls, d: dict) -> 'Scenario':
        problems = check_format_of_scenario(d)
        if problems:
            raise ConfigError(f'Invalid scenario: {", ".join(problems)}')

        seed = d.get('seed', 0)
        ensemble, modulation = None, Modulation()

        if 'ensemble' in d:
            e = dict(d['ensemble'])
            modulation = Modulation.from_lab(e.pop('modulation', {}))
            e.setdefault('seed', seed)
            ensemble = EnsembleSpec.from_lab(e)

        return cls(
            field_config=FieldConfig.from_lab(d['field']),
            schedule=d.get('schedule'),
            ensemble=ensemble,
            modulation=modulation,
            imaging=ImagingSpec.from_lab(d['imaging']) if 'imaging' in d else None,
            characterization=CharacterizationSpec(**d.get('characterization', {})),
            outputs=Path(d.get('outputs', DEFAULT_OUTPUTS)),
            seed=seed
        )


def parse_scenario(text: str, source: str = '<string>') -> Scenario:
    """ Parse scenario JSON, reporting syntax errors with line and column """
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f'{source}: line {e.lineno}, column {e.colno}: {e.msg}')

    return Scenario.from_dict(d)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)

    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(e)

    logger.info('Loaded scenario %s', path)
    return parse_scenario(text, str(path))
