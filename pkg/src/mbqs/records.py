"""Shot records and tabular outputs.

A shot record file holds one JSON metadata object on its first line followed
by one fixed-width 0/1 string of length L per shot. Bit b = 1 means the atom
was read as Rydberg-excited (n = 1, sz = +1); the all-down state reads as 0.

Tables are CSV files whose first line is a ``#`` comment naming the units of
every column. Each table has a JSON mirror with the same rows.
"""

from dataclasses import dataclass
import csv
import io
import json
import os
import tempfile

import numpy as np

from .errors import RecordFormatError

REQUIRED_META = ("device_id", "L", "a_um", "g", "J", "initial_state", "t_us", "n_shots")


@dataclass
class ShotRecordSet:
    """Metadata plus an (n_shots, L) matrix of measured occupations."""

    meta: dict
    bits: np.ndarray

    def __post_init__(self):
        missing = [k for k in REQUIRED_META if k not in self.meta]
        if missing:
            raise RecordFormatError(f"metadata lacks {', '.join(missing)}")
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise RecordFormatError("bits must be a 2-D array")
        if bits.shape[0] < 1:
            raise RecordFormatError("a record set needs at least one shot")
        if bits.shape[1] != int(self.meta["L"]):
            raise RecordFormatError(f"rows have length {bits.shape[1]}, metadata says L = {self.meta['L']}")
        if bits.shape[0] != int(self.meta["n_shots"]):
            raise RecordFormatError(f"{bits.shape[0]} rows, metadata says n_shots = {self.meta['n_shots']}")
        if not np.isin(bits, (0, 1)).all():
            raise RecordFormatError("bits must be 0 or 1")
        self.bits = bits.astype(np.int8)

    @property
    def L(self):
        return int(self.meta["L"])

    @property
    def n_shots(self):
        return self.bits.shape[0]

    def spins(self):
        """sz = 2 b - 1 per shot and site."""
        return 2.0 * self.bits - 1.0

    def dumps(self):
        lines = [json.dumps(self.meta, sort_keys=True)]
        lines += ["".join("1" if b else "0" for b in row) for row in self.bits]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text):
        lines = text.splitlines()
        if not lines:
            raise RecordFormatError("empty record file")
        try:
            meta = json.loads(lines[0])
        except json.JSONDecodeError as exc:
            raise RecordFormatError(f"first line is not JSON metadata: {exc}") from None
        if not isinstance(meta, dict):
            raise RecordFormatError("metadata must be a JSON object")
        rows = [ln.strip() for ln in lines[1:] if ln.strip()]
        L = int(meta.get("L", -1))
        for i, row in enumerate(rows):
            if len(row) != L or set(row) - {"0", "1"}:
                raise RecordFormatError(f"shot {i}: expected {L} characters of 0/1, got {row!r}")
        bits = np.array([[c == "1" for c in row] for row in rows], dtype=np.int8).reshape(len(rows), max(L, 0))
        return cls(meta, bits)


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_records(path, records):
    atomic_write(path, records.dumps())


def read_records(path):
    with open(path) as fh:
        return ShotRecordSet.loads(fh.read())


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def table_text(columns, rows, units):
    """CSV text with a ``#`` units comment above the header."""
    buf = io.StringIO()
    buf.write("# units: " + ", ".join(f"{c} [{units.get(c, '-')}]" for c in columns) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def write_table(path, columns, rows, units, mirror=True):
    """Write a CSV table and, unless ``mirror`` is false, its JSON twin."""
    rows = [list(r) for r in rows]
    atomic_write(path, table_text(columns, rows, units))
    if mirror:
        doc = {"columns": list(columns), "units": {c: units.get(c, "-") for c in columns},
               "rows": [dict(zip(columns, r)) for r in rows]}
        atomic_write(os.path.splitext(path)[0] + ".json", json.dumps(doc, indent=1, sort_keys=True) + "\n")


def read_table(path, expected=None):
    """Columns and rows of a table file; numeric cells are parsed as floats."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    try:
        columns = next(reader)
    except StopIteration:
        raise RecordFormatError(f"{path}: no header row") from None
    if expected is not None and list(columns) != list(expected):
        raise RecordFormatError(f"{path}: columns {columns}, expected {list(expected)}")
    rows = []
    for i, r in enumerate(reader):
        if len(r) != len(columns):
            raise RecordFormatError(f"{path}: row {i} has {len(r)} cells, expected {len(columns)}")
        rows.append([_parse(c) for c in r])
    return columns, rows


def _parse(cell):
    try:
        v = float(cell)
    except ValueError:
        return cell
    return int(v) if cell.lstrip("-").isdigit() else v
