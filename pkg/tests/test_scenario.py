import json
import math

import pytest

from taap_ring.exception import ConfigError
from taap_ring.formating import (
    FIELD_CONFIG_RULES,
    breakpoints_are_formatted,
    check_format_of_field_config,
    check_format_of_scenario,
    check_format_of_schedule,
    number_is_formatted,
    recurse_rules
)
from taap_ring.scenario import Modulation, Scenario, load_scenario, parse_scenario


@pytest.fixture
def scenario_dict(reference_field) -> dict:
    return {
        'field': reference_field,
        'schedule': {'phi_ddot': 314.0, 't_accel': 0.2, 'hold_time': 1.5},
        'ensemble': {'N_thermal': 1000, 'T_nK': 500, 'modulation': {'h1': 0.11, 'phi1_deg': -118}},
        'imaging': {'pixel_size_um': 4.0, 'psf_um': 3.0},
        'characterization': {'n_quad': 32, 'n_phi': 8},
        'outputs': 'runs/a',
        'seed': 11
    }


@pytest.mark.parametrize('x, ok', [
    (1, True),
    (2.5, True),
    (True, False),
    (math.nan, False),
    ('1', False),
])
def test_number_is_formatted(x, ok) -> None:
    assert number_is_formatted(x) is ok


def test_breakpoints_must_be_ordered() -> None:
    assert breakpoints_are_formatted([[0, 1.0], [1, 2.0]])
    assert not breakpoints_are_formatted([[1, 1.0], [0, 2.0]])
    assert not breakpoints_are_formatted([[0, 1.0, 2.0]])


def test_recurse_rules_reports_paths() -> None:
    errors = recurse_rules({'delta': 2.0, 'colour': 'red'}, FIELD_CONFIG_RULES, 'field')
    assert 'field.delta' in errors
    assert 'field.colour (unknown key)' in errors


def test_field_config_needs_one_rf_amplitude(reference_field) -> None:
    del reference_field['Omega_rf_kHz']
    assert any('B_rf_G|Omega_rf_kHz' in e for e in check_format_of_field_config(reference_field))


def test_valid_scenario_has_no_problems(scenario_dict) -> None:
    assert check_format_of_scenario(scenario_dict) == []


def test_scenario_problems(scenario_dict) -> None:
    scenario_dict['ensemble']['T_nK'] = -1
    del scenario_dict['schedule']['t_accel']
    scenario_dict['imaging'] = 'big'

    errors = check_format_of_scenario(scenario_dict)
    assert 'ensemble.T_nK' in errors
    assert 'schedule.t_accel (missing)' in errors
    assert 'imaging (expected an object)' in errors


def test_final_speed_replaces_ramp_duration(scenario_dict) -> None:
    del scenario_dict['schedule']['t_accel']
    scenario_dict['schedule']['omega_final'] = 62.8
    assert check_format_of_scenario(scenario_dict) == []
    assert check_format_of_schedule({'omega_final': 62.8}) == ['schedule.phi_ddot (missing)']


def test_scenario_from_dict(scenario_dict) -> None:
    scenario = Scenario.from_dict(scenario_dict)

    assert scenario.seed == 11
    assert scenario.ensemble.seed == 11
    assert scenario.ensemble.T == pytest.approx(500e-9)
    assert scenario.modulation.h1 == 0.11
    assert scenario.modulation.phi1 == pytest.approx(math.radians(-118))
    assert scenario.imaging.pixel_size == pytest.approx(4e-6)
    assert scenario.characterization.n_quad == 32
    assert str(scenario.outputs) == 'runs/a'


def test_overrides(scenario_dict) -> None:
    scenario = Scenario.from_dict(scenario_dict).with_overrides(seed=5, outputs='elsewhere')
    assert scenario.seed == 5
    assert scenario.ensemble.seed == 5
    assert str(scenario.outputs) == 'elsewhere'


def test_minimal_scenario(reference_field) -> None:
    scenario = Scenario.from_dict({'field': reference_field})
    assert scenario.schedule is None
    assert scenario.ensemble is None
    assert scenario.modulation == Modulation()
    assert scenario.modulation.is_flat


def test_malformed_json_reports_position() -> None:
    with pytest.raises(ConfigError) as e:
        parse_scenario('{\n  "field": {,\n}', 'broken.json')
    assert 'broken.json: line 2, column' in e.value.ex_msg


def test_invalid_scenario_lists_keys(reference_field) -> None:
    with pytest.raises(ConfigError) as e:
        parse_scenario(json.dumps({'field': {**reference_field, 'delta': 1.5}}))
    assert 'field.delta' in e.value.ex_msg


def test_load_scenario(scenario_dict, tmp_path) -> None:
    path = tmp_path / 'scenario.json'
    path.write_text(json.dumps(scenario_dict))
    assert load_scenario(path).field_config.delta == pytest.approx(0.37)


def test_missing_scenario_file(tmp_path) -> None:
    with pytest.raises(ConfigError):
        load_scenario(tmp_path / 'nope.json')
