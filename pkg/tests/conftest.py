import pytest

from taap_ring.field import FieldConfig
from taap_ring.potential import analytic_ring

REFERENCE_FIELD = {
    'alpha_G_per_cm': 70.0,
    'B_m_G': 1.4,
    'delta': 0.37,
    'phi0_deg': 0.0,
    'f_m_kHz': 5.02,
    'Omega_rf_kHz': 357.0,
    'f_rf_MHz': 2.55
}


@pytest.fixture
def reference_field() -> dict:
    return dict(REFERENCE_FIELD)


@pytest.fixture
def reference_config() -> FieldConfig:
    return FieldConfig.from_lab(REFERENCE_FIELD)


@pytest.fixture
def flat_config(reference_config) -> FieldConfig:
    """ Untilted ring, uniform RF coupling: the limit of the analytic formulas """
    return reference_config.replace(delta=0.0, coupling='uniform')


@pytest.fixture
def reference_ring(reference_config):
    return analytic_ring(reference_config)


@pytest.fixture
def flat_ring(flat_config):
    return analytic_ring(flat_config)
