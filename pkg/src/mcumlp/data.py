"""Embedded datasets, dataset CSV ingestion and small file helpers."""

import csv
import hashlib
import io
import logging
import os
import tempfile
from importlib import resources

import numpy as np

from .errors import IntegrityError, ParseError
from .mlp import Dataset

logger = logging.getLogger(__name__)

# sha256 of the verbatim table transcriptions shipped in mcumlp/data.
FIXTURE_SHA256 = {
    "xor": "6a118a7f2c83bc30e3d78b9c685921fa53354d636cc09c5de4d73e3b9b2ff4c8",
    "robot1": "26eb668ce435002aa50907f8bba722f8a2d0eaaba858084f1b6e4f6d9724ce8b",
    "robot2": "b5447f31c1b2ba463a6f826d86626dd4ffd8905b6460e2afbccc7b2a33302e8f",
    "robot3": "0d8837c8f6fae0e36287a0b6b551d82944b05498ac69089606f2f7b4b36c7dab",
    "paper_timing": "ab6ae5f4e60abb2e5186940a820313f777a8b463a14f84402f5b606e5f8741f2",
}
FIXTURES = ("xor", "robot1", "robot2", "robot3")
FIXTURE_NAMES = {
    "xor": ("A", "B", "XOR"),
    # Column order of the robot tables: front, right, left sensor; left, right wheel.
    "robot1": ("FS", "RS", "LS", "LW", "RW"),
    "robot2": ("FS", "RS", "LS", "LW", "RW"),
    "robot3": ("FS", "RS", "LS", "LW", "RW"),
}
SENSOR_RANGE = 3.0


def read_fixture_text(name):
    if name not in FIXTURE_SHA256:
        raise KeyError(f"unknown fixture {name!r}")
    raw = resources.files("mcumlp").joinpath("data").joinpath(f"{name}.csv").read_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    if digest != FIXTURE_SHA256[name]:
        raise IntegrityError(f"fixture {name!r} checksum mismatch ({digest})")
    return raw.decode("utf-8")


def load_fixture(name):
    if name not in FIXTURES:
        raise KeyError(f"unknown dataset fixture {name!r}; choose from {FIXTURES}")
    ds = parse_dataset_csv(read_fixture_text(name))
    ds.names = FIXTURE_NAMES[name]
    return ds


def parse_dataset_csv(text):
    """Parse ``in1..inP,out1..outM`` CSV text into a Dataset (columns = samples)."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or not any(cell.strip() for cell in rows[0]):
        raise ParseError("empty file, expected header in1..inP,out1..outM", line=1)
    header = [cell.strip() for cell in rows[0]]
    n_in = sum(1 for h in header if h.startswith("in"))
    n_out = len(header) - n_in
    expected = [f"in{i + 1}" for i in range(n_in)] + [f"out{i + 1}" for i in range(n_out)]
    if header != expected or n_in == 0 or n_out == 0:
        raise ParseError(f"bad header {header!r}, expected in1..inP,out1..outM", line=1)

    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=lineno)
        try:
            values.append([float(cell) for cell in row])
        except ValueError as exc:
            raise ParseError(f"non-numeric cell ({exc})", line=lineno) from None
    if not values:
        raise ParseError("no samples after header", line=2)
    table = np.asarray(values, dtype=np.float32).T
    return Dataset(table[:n_in], table[n_in:])


def load_dataset_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_dataset_csv(fh.read())


def format_float(value):
    # 17 significant digits survive any binary32 -> decimal -> binary32 trip.
    return format(float(value), ".17g")


def dataset_to_csv(dataset):
    header = [f"in{i + 1}" for i in range(dataset.n_inputs)]
    header += [f"out{i + 1}" for i in range(dataset.n_outputs)]
    lines = [",".join(header)]
    table = np.vstack([dataset.inputs, dataset.targets]).T
    for row in table:
        lines.append(",".join(format_float(v) for v in row))
    return "\n".join(lines) + "\n"


def save_dataset_csv(path, dataset):
    atomic_write(path, dataset_to_csv(dataset).encode("utf-8"))


def lint_dataset(dataset, max_range=SENSOR_RANGE):
    """Warn about sensor inputs outside ``[0, max_range]``; never edits data.

    Returns the warning messages (rows are 1-based sample indices).
    """
    messages = []
    names = dataset.names or [f"in{i + 1}" for i in range(dataset.n_inputs)]
    bad = (dataset.inputs < 0) | (dataset.inputs > max_range)
    for r, c in zip(*np.nonzero(bad)):
        msg = (
            f"row {c + 1}: {names[r]}={float(dataset.inputs[r, c]):.2f} "
            f"outside sensor range [0, {max_range}]"
        )
        logger.warning(msg)
        messages.append(msg)
    return messages


def atomic_write(path, payload):
    """Write bytes to ``path`` via a temp file in the same directory + rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def rows_to_csv(header, rows):
    """Deterministic LF-terminated CSV text; floats at 17 significant digits."""
    out = [",".join(header)]
    for row in rows:
        out.append(",".join(_cell(v) for v in row))
    return "\n".join(out) + "\n"


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)
