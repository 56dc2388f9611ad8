import math

from taap_ring.constants import SPECIES


def number_is_formatted(x) -> bool:
    if type(x) is bool:
        return False
    if not isinstance(x, (int, float)):
        return False
    return math.isfinite(x)


def number_is_positive(x) -> bool:
    return number_is_formatted(x) and x > 0


def number_is_nonnegative(x) -> bool:
    return number_is_formatted(x) and x >= 0


def tilt_is_formatted(x) -> bool:
    return number_is_formatted(x) and 0 <= x < 1


def count_is_formatted(i) -> bool:
    if type(i) is not int:
        return False
    if i < 0:
        return False
    return True


def quadrature_is_formatted(i) -> bool:
    return count_is_formatted(i) and i >= 8


def workers_are_formatted(i) -> bool:
    return count_is_formatted(i) and i >= 1


def flag_is_formatted(b) -> bool:
    return type(b) is bool


def species_is_formatted(s) -> bool:
    return type(s) is str and s in SPECIES


def coupling_is_formatted(s) -> bool:
    return s in ('projected', 'uniform')


def restoring_is_formatted(s) -> bool:
    return s in ('pendulum', 'harmonic')


def jumps_are_formatted(s) -> bool:
    return s in ('auto', 'off')


def path_is_formatted(s) -> bool:
    return type(s) is str and len(s) > 0


def numbers_are_formatted(v) -> bool:
    if type(v) is not list or len(v) == 0:
        return False
    return all(number_is_formatted(x) for x in v)


def breakpoints_are_formatted(v) -> bool:
    """ List of [t, value] pairs with non-decreasing t """
    if type(v) is not list or len(v) == 0:
        return False
    last = -math.inf
    for pair in v:
        if type(pair) is not list or len(pair) != 2:
            return False
        if not (number_is_nonnegative(pair[0]) and number_is_formatted(pair[1])):
            return False
        if pair[0] < last:
            return False
        last = pair[0]
    return True


FIELD_CONFIG_RULES = {
    'alpha_G_per_cm': number_is_positive,
    'B_m_G': number_is_nonnegative,
    'delta': tilt_is_formatted,
    'phi0_deg': number_is_formatted,
    'f_m_kHz': number_is_positive,
    'B_rf_G': number_is_positive,
    'Omega_rf_kHz': number_is_positive,
    'f_rf_MHz': number_is_positive,
    'species': species_is_formatted,
    'kappa': number_is_positive,
    'coupling': coupling_is_formatted
}

FIELD_CONFIG_REQUIRED = {'alpha_G_per_cm', 'B_m_G', 'delta', 'phi0_deg', 'f_m_kHz', 'f_rf_MHz'}

SCHEDULE_RULES = {
    'phi_ddot': number_is_formatted,
    't_accel': number_is_nonnegative,
    'omega_final': number_is_formatted,
    'jump_start': number_is_formatted,
    'jump_end': number_is_formatted,
    'jumps': jumps_are_formatted,
    'delta_ramp': breakpoints_are_formatted,
    'omega_phi_table': breakpoints_are_formatted,
    'hold_time': number_is_nonnegative,
    'restoring': restoring_is_formatted,
    'dt': number_is_positive,
    'sample_every': workers_are_formatted,
    'sweep_phi_ddot': numbers_are_formatted,
    'ring_radius_um': number_is_positive,
    'omega_phi_hz': number_is_positive,
    'phi_offset_mrad': number_is_formatted
}

SCHEDULE_REQUIRED = {'phi_ddot'}

MODULATION_RULES = {
    'h1': number_is_nonnegative,
    'h2': number_is_nonnegative,
    'phi1_deg': number_is_formatted,
    'phi2_deg': number_is_formatted
}

ENSEMBLE_RULES = {
    'N_thermal': count_is_formatted,
    'T_nK': number_is_positive,
    'N_bec': count_is_formatted,
    'mu_nK': number_is_positive,
    'seed': count_is_formatted,
    'n_streams': workers_are_formatted,
    'workers': workers_are_formatted,
    'modulation': MODULATION_RULES
}

ENSEMBLE_REQUIRED = {'N_thermal', 'T_nK'}

IMAGING_RULES = {
    'pixel_size_um': number_is_positive,
    'extent_um': number_is_positive,
    'psf_um': number_is_nonnegative,
    'noise': number_is_nonnegative,
    'fit_ellipticity': flag_is_formatted
}

IMAGING_REQUIRED = {'pixel_size_um'}

CHARACTERIZATION_RULES = {
    'n_quad': quadrature_is_formatted,
    'n_phi': workers_are_formatted,
    'include_gravity': flag_is_formatted,
    'workers': workers_are_formatted
}

SCENARIO_RULES = {
    'field': FIELD_CONFIG_RULES,
    'schedule': SCHEDULE_RULES,
    'ensemble': ENSEMBLE_RULES,
    'imaging': IMAGING_RULES,
    'characterization': CHARACTERIZATION_RULES,
    'outputs': path_is_formatted,
    'seed': count_is_formatted
}

SCENARIO_REQUIRED = {'field'}


def recurse_rules(d: dict, rule: dict, path: str = '') -> list[str]:
    """
    Walk a rule dict alongside a payload and collect the keys that break a rule
    :param d: Payload to check
    :param rule: Mapping of key to predicate or nested rule dict
    :param path: Dotted prefix for reported keys
    :return: Offending keys, empty when the payload is well formed
    """
    if callable(rule):
        return [] if rule(d) else [path or '<root>']

    errors = []

    for key, arg in d.items():
        where = f'{path}.{key}' if path else key

        if key not in rule:
            errors.append(f'{where} (unknown key)')
            continue

        subrule = rule[key]

        if isinstance(subrule, dict):
            if type(arg) is not dict:
                errors.append(f'{where} (expected an object)')
            else:
                errors.extend(recurse_rules(arg, subrule, where))

        elif not subrule(arg):
            errors.append(where)

    return errors


def check_format_of_config(d: dict, rules: dict, required: set, path: str = '') -> list[str]:
    """ Return the list of problems with a config mapping (empty if valid) """
    if type(d) is not dict:
        return [f'{path or "<root>"} (expected an object)']

    errors = [f'{path + "." if path else ""}{k} (missing)' for k in sorted(required - set(d.keys()))]
    return errors + recurse_rules(d, rules, path)


def check_format_of_field_config(d: dict, path: str = '') -> list[str]:
    errors = check_format_of_config(d, FIELD_CONFIG_RULES, FIELD_CONFIG_REQUIRED, path)

    if type(d) is dict and ('B_rf_G' in d) == ('Omega_rf_kHz' in d):
        errors.append(f'{path + "." if path else ""}B_rf_G|Omega_rf_kHz (exactly one required)')

    return errors


def schedule_missing_keys(d: dict) -> list[str]:
    """ phi_ddot is always needed, t_accel only when omega_final does not fix the ramp """
    missing = sorted(SCHEDULE_REQUIRED - set(d.keys()))
    if 't_accel' not in d and 'omega_final' not in d:
        missing.append('t_accel')
    return missing


def check_format_of_schedule(d: dict, path: str = 'schedule') -> list[str]:
    if type(d) is not dict:
        return [f'{path} (expected an object)']

    return [f'{path}.{k} (missing)' for k in schedule_missing_keys(d)] + recurse_rules(d, SCHEDULE_RULES, path)


def check_format_of_scenario(d: dict) -> list[str]:
    errors = check_format_of_config(d, SCENARIO_RULES, SCENARIO_REQUIRED)

    if type(d) is not dict:
        return errors

    if type(d.get('field')) is dict:
        errors = [e for e in errors if not e.startswith('field.')]
        errors += check_format_of_field_config(d['field'], 'field')

    if type(d.get('schedule')) is dict:
        errors += [f'schedule.{k} (missing)' for k in schedule_missing_keys(d['schedule'])]

    sections = {
        'ensemble': ENSEMBLE_REQUIRED,
        'imaging': IMAGING_REQUIRED
    }

    for section, required in sections.items():
        if type(d.get(section)) is dict:
            missing = required - set(d[section].keys())
            errors += [f'{section}.{k} (missing)' for k in sorted(missing)]

    return errors
