import pytest

import taap_ring.reproduce as rp

from taap_ring.exception import AcceptanceFailure, ConfigError

FAST_ITEMS = ['freq-table', 'centrifugal', 'mach', 'corrugation', 'flatness-static', 'flatness-moving']


@pytest.mark.parametrize('item', FAST_ITEMS)
def test_fast_items_pass(item) -> None:
    verdicts = rp.run_items([item])
    assert verdicts
    assert all(v.passed for v in verdicts), [v.row() for v in verdicts if not v.passed]


def test_bangbang_item_passes() -> None:
    assert all(v.passed for v in rp.run_items(['bangbang']))


@pytest.mark.slow
def test_tof_item_passes() -> None:
    assert all(v.passed for v in rp.run_items(['tof'], seed=3))


def test_unknown_item() -> None:
    with pytest.raises(ConfigError) as e:
        rp.run_items(['centrifugal', 'warp-drive'])
    assert 'warp-drive' in e.value.ex_msg


def test_all_expands_to_every_item(monkeypatch) -> None:
    seen = []
    for name in list(rp.ITEMS):
        monkeypatch.setitem(rp.ITEMS, name, lambda seed, name=name: seen.append(name) or [])
    rp.run_items(['all'])
    assert seen == list(rp.ITEMS)


def test_flattest_phase_is_at_least_as_flat_as_aligned_harmonics() -> None:
    phase = rp.flattest_phase(0.003, 0.002)
    best = rp.modulation_extrema(0.003, 0.002, 0.0, phase)
    aligned = rp.modulation_extrema(0.003, 0.002, 0.0, 0.0)
    assert best[1] - best[0] <= aligned[1] - aligned[0]
    assert best[1] - best[0] < 2 * (0.003 + 0.002)


def test_verdict_helpers() -> None:
    assert rp.within('x', 'q', 100, 104, 0.05).passed
    assert not rp.within('x', 'q', 100, 106, 0.05).passed
    assert rp.within_factor('x', 'q', 3e-23, 2.1e-23, 1.5).passed
    assert not rp.at_most('x', 'q', 1.0, 1.1).passed
    assert 'FAIL' in rp.at_most('x', 'q', 1.0, 1.1).row()


def test_check_raises_on_failure() -> None:
    rp.check([rp.within('x', 'q', 1, 1, 0.1)])
    with pytest.raises(AcceptanceFailure):
        rp.check([rp.within('x', 'q', 1, 2, 0.1)])
