import json
import math

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from taap_ring.encoding import (
    PROFILE_DIGITS,
    encode,
    format_number,
    read_csv,
    read_grid,
    read_json,
    write_csv,
    write_grid,
    write_json
)
from taap_ring.seeding import make_rng, substreams


@dataclass
class Point:
    x: float
    y: float


def test_encode_sorts_keys() -> None:
    assert encode({'b': 1, 'a': 2}) == '{"a":2,"b":1}'


def test_encode_numpy_and_dataclasses() -> None:
    data = {'arr': np.array([1.5, 2.0]), 'n': np.int64(3), 'flag': np.bool_(True), 'p': Point(1.0, 2.0),
            'path': Path('out/x')}
    assert json.loads(encode(data)) == {'arr': [1.5, 2.0], 'n': 3, 'flag': True, 'p': {'x': 1.0, 'y': 2.0},
                                        'path': 'out/x'}


def test_non_finite_becomes_null() -> None:
    assert json.loads(encode({'tau': math.inf, 'v': [math.nan, 1.0]})) == {'tau': None, 'v': [None, 1.0]}


def test_json_file(tmp_path) -> None:
    path = write_json(tmp_path / 'sub' / 'report.json', {'z': 1, 'a': [1, 2]})
    assert path.read_text().endswith('\n')
    assert read_json(path) == {'a': [1, 2], 'z': 1}


def test_format_number() -> None:
    assert format_number(math.pi, 4) == '3.142'
    assert format_number(np.float32(0.5), 3) == '0.5'


def test_profile_csv_keeps_fifteen_digits(tmp_path) -> None:
    value = 1.234567890123456789e-29
    path = write_csv(tmp_path / 'profile.csv', ['phi_rad', 'V_J'], [[0.1, value]], digits=PROFILE_DIGITS)

    assert path.read_text().splitlines()[1] == '0.1,1.23456789012346e-29'

    header, rows = read_csv(path)
    assert header == ['phi_rad', 'V_J']
    assert rows[0, 1] == pytest.approx(value, rel=1e-14)


def test_empty_csv_has_header_only(tmp_path) -> None:
    header, rows = read_csv(write_csv(tmp_path / 'empty.csv', ['t', 'phi'], []))
    assert header == ['t', 'phi']
    assert rows.shape == (0, 2)


def test_grid_file(tmp_path) -> None:
    grid = np.arange(6, dtype=float).reshape(2, 3) / 7
    np.testing.assert_allclose(read_grid(write_grid(tmp_path / 'g.csv', grid)), grid, rtol=1e-8)


def test_streams_are_independent() -> None:
    a = make_rng(1, 'ensemble').random(4)
    b = make_rng(1, 'imaging').random(4)
    again = make_rng(1, 'ensemble').random(4)

    np.testing.assert_array_equal(a, again)
    assert not np.array_equal(a, b)


def test_substreams_are_distinct() -> None:
    first, second = substreams(9, 'ensemble', 2)
    assert not np.array_equal(first.random(3), second.random(3))
