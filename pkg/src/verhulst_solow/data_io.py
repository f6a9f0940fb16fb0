"""Loading, bundling and exporting of CSV time series.

CSV dialect: comma separated, dot decimal, UTF-8, mandatory header row.
Years are signed reals (BC years negative).
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping

import numpy as np

from .allometry import TimeSeries
from .integrator import Trajectory

DATA_ENV = "VERHULST_SOLOW_DATA"
MANIFEST = "manifest.json"


class DataError(ValueError):
    """Malformed or invalid data file."""


@dataclass(frozen=True)
class Dataset:
    id: str
    description: str
    provenance: str
    series: Mapping[str, TimeSeries]

    def __post_init__(self):
        if not self.provenance.strip():
            raise DataError(f"dataset {self.id!r}: empty provenance")
        if not self.series:
            raise DataError(f"dataset {self.id!r}: no series")

    def __getitem__(self, name: str) -> TimeSeries:
        return self.series[name]

    @property
    def primary(self) -> TimeSeries:
        """The first listed series."""
        return next(iter(self.series.values()))


def load_csv(
    path: str | os.PathLike,
    value_column: str | None = None,
    *,
    year_column: str = "year",
    name: str | None = None,
) -> TimeSeries:
    """Read one validated series. ``value_column`` defaults to the first
    column other than the year column."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError(f"{path}: empty file, header row required") from None
    if year_column not in header:
        raise DataError(f"{path}:1: missing year column {year_column!r}")
    if value_column is None:
        others = [h for h in header if h != year_column]
        if not others:
            raise DataError(f"{path}:1: no value column")
        value_column = others[0]
    if value_column not in header:
        raise DataError(f"{path}:1: missing value column {value_column!r}")
    iy, iv = header.index(year_column), header.index(value_column)

    rows: dict[float, tuple[float, int]] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            year = float(row[iy])
            value = float(row[iv])
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-numeric entry {row!r}") from None
        if not (np.isfinite(year) and np.isfinite(value)):
            raise DataError(f"{path}:{lineno}: non-finite entry")
        if value <= 0:
            raise DataError(f"{path}:{lineno}: value {value!r} is not positive")
        if year in rows:
            raise DataError(f"{path}:{lineno}: duplicate year {year:g} (first on line {rows[year][1]})")
        rows[year] = (value, lineno)

    years = sorted(rows)
    return TimeSeries(name or value_column, years, [rows[y][0] for y in years])


def data_root() -> Path:
    override = os.environ.get(DATA_ENV)
    if override:
        return Path(override)
    return Path(str(resources.files("verhulst_solow") / "data"))


def _manifest(root: Path) -> dict:
    try:
        return json.loads((root / MANIFEST).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read dataset manifest in {root}: {exc}") from exc


def available() -> list[str]:
    return sorted(_manifest(data_root()))


def bundled(dataset_id: str) -> Dataset:
    root = data_root()
    manifest = _manifest(root)
    if dataset_id not in manifest:
        raise KeyError(f"unknown dataset {dataset_id!r}; known: {', '.join(sorted(manifest))}")
    entry = manifest[dataset_id]
    series = {
        name: load_csv(root / info["path"], info["value_column"], year_column=info.get("year_column", "year"), name=name)
        for name, info in entry["series"].items()
    }
    return Dataset(dataset_id, entry.get("description", ""), entry.get("provenance", ""), series)


def format_number(v: float, digits: int | None = None) -> str:
    """``repr`` (shortest round-tripping) when ``digits`` is None, otherwise
    ``digits`` significant figures."""
    v = float(v)
    if digits is None:
        return repr(v)
    return f"{v:.{digits}g}"


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_table(path, header, rows, digits: int | None = None) -> None:
    """Atomically write a CSV table; floats are formatted with ``format_number``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_number(c, digits) if isinstance(c, (float, np.floating)) else c for c in row])
    atomic_write_text(path, buf.getvalue())


def export_csv(
    obj: TimeSeries | Trajectory,
    path: str | os.PathLike,
    *,
    digits: int | None = None,
    columns: list[str] | None = None,
) -> None:
    """Write a series as ``year,<name>`` or a trajectory as ``t,x1..xn``.

    With the default ``digits=None`` every number is written with ``repr``
    so that :func:`load_csv` recovers it bit for bit.
    """
    if isinstance(obj, TimeSeries):
        rows = zip(obj.years.tolist(), obj.values.tolist())
        write_table(path, ["year", obj.name], rows, digits)
    elif isinstance(obj, Trajectory):
        states = obj.states
        names = columns or [f"x{i + 1}" for i in range(states.shape[1])]
        if len(names) != states.shape[1]:
            raise ValueError(f"{len(names)} column names for a {states.shape[1]}-dimensional trajectory")
        rows = ([t, *s] for t, s in zip(obj.times.tolist(), states.tolist()))
        write_table(path, ["t", *names], rows, digits)
    else:
        raise TypeError(f"cannot export {type(obj).__name__}")
