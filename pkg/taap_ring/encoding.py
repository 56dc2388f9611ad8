import csv
import json
import math
import dataclasses

from pathlib import Path

import numpy as np

# Significant digits per export
TRAJECTORY_DIGITS = 12
IMAGE_DIGITS = 9
PROFILE_DIGITS = 15


class Encoder(json.JSONEncoder):
    def default(self, o, *args):
        if isinstance(o, np.integer):
            return int(o)
        elif isinstance(o, np.floating):
            return float(o)
        elif isinstance(o, np.bool_):
            return bool(o)
        elif isinstance(o, np.ndarray):
            return o.tolist()
        elif isinstance(o, Path):
            return str(o)
        elif dataclasses.is_dataclass(o) and not isinstance(o, type):
            if hasattr(o, 'to_dict'):
                return o.to_dict()
            return dataclasses.asdict(o)
        return super().default(o)


def clean_floats(data):
    """ Replace non-finite floats (not valid JSON) with None """
    if isinstance(data, float) and not math.isfinite(data):
        return None
    elif isinstance(data, dict):
        return {k: clean_floats(v) for k, v in data.items()}
    elif isinstance(data, (list, tuple)):
        return [clean_floats(v) for v in data]
    return data


def encode(data, indent: int | None = None) -> str:
    """ Deterministic JSON: sorted keys, numpy and dataclass aware """
    if indent is None:
        return json.dumps(clean_floats(_plain(data)), cls=Encoder, separators=(',', ':'), sort_keys=True)
    return json.dumps(clean_floats(_plain(data)), cls=Encoder, indent=indent, sort_keys=True)


def _plain(data):
    # Encoder.default only sees types json cannot handle, so round-trip once
    return json.loads(json.dumps(data, cls=Encoder))


def write_json(path: str | Path, data) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(encode(data, indent=2) + '\n')
    return path


def read_json(path: str | Path):
    return json.loads(Path(path).read_text())


def format_number(x: float, digits: int) -> str:
    return f'{float(x):.{digits}g}'


def write_csv(path: str | Path, header: list[str], rows, digits: int = TRAJECTORY_DIGITS) -> Path:
    """
    Write numeric rows with a fixed number of significant digits
    :param path: Output file, parent directories are created
    :param header: Column names
    :param rows: Iterable of numeric sequences
    :param digits: Significant digits per value
    :return: Path that was written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with path.open('w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(x, digits) for x in row])

    return path


def read_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    with Path(path).open(newline='') as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader if row]
    return header, np.array(rows, dtype=float).reshape(-1, len(header))


def write_grid(path: str | Path, grid: np.ndarray, digits: int = IMAGE_DIGITS) -> Path:
    """ Row-major grid without header """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with path.open('w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        for row in np.asarray(grid):
            writer.writerow([format_number(x, digits) for x in row])

    return path


def read_grid(path: str | Path) -> np.ndarray:
    with Path(path).open(newline='') as f:
        return np.array([[float(x) for x in row] for row in csv.reader(f) if row], dtype=float)
