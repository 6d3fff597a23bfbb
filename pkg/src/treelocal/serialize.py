"""CSV and binary layouts for fields, extremal samples, measures and curves.

Field files list vertices level-major, lexicographic within a level, which
is the flat index order used throughout the package.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from treelocal.errors import DomainError
from treelocal.extremal import ExtremalSample, WeightedMeasure
from treelocal.isomorphism import CoupledTriple
from treelocal.tree import TreeShape

_BIN_MAGIC = b"TLF1"


def fmt(x) -> str:
    """Round-trip float formatting; identical inputs give identical bytes."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_table(path: Path, columns: Sequence[str], rows: Iterable[Sequence], header: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if header is not None:
            fh.write(f"# {header}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def read_table(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def read_header(path: Path) -> dict:
    with open(path) as fh:
        first = fh.readline()
    if not first.startswith("# "):
        raise DomainError("file has no metadata header")
    return json.loads(first[2:])


# -- fields ------------------------------------------------------------------


def write_field_csv(path: Path, values: np.ndarray, columns: Sequence[str] = ("vertex_index", "value")) -> None:
    """One row per vertex; extra columns for aligned fields (values of shape (V, c))."""
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    if len(columns) != v.shape[1] + 1:
        raise DomainError("column count does not match the values")
    write_table(path, columns, ([i, *row] for i, row in enumerate(v)))


def read_field_csv(path: Path) -> np.ndarray:
    _, rows = read_table(path)
    arr = np.array([[float(x) for x in r[1:]] for r in rows])
    return arr[:, 0] if arr.shape[1] == 1 else arr


def write_field_binary(path: Path, shape: TreeShape, values: np.ndarray) -> None:
    """Header (magic, b, n as little-endian int32) then float64 values."""
    v = np.ascontiguousarray(values, dtype="<f8")
    if v.shape != (shape.num_vertices,):
        raise DomainError("values do not match the tree shape")
    with open(path, "wb") as fh:
        fh.write(_BIN_MAGIC)
        fh.write(np.array([shape.b, shape.n], dtype="<i4").tobytes())
        fh.write(v.tobytes())


def read_field_binary(path: Path) -> tuple[TreeShape, np.ndarray]:
    raw = Path(path).read_bytes()
    if raw[:4] != _BIN_MAGIC:
        raise DomainError("not a field file")
    b, n = np.frombuffer(raw[4:12], dtype="<i4")
    shape = TreeShape(int(b), int(n))
    vals = np.frombuffer(raw[12:], dtype="<f8").copy()
    if vals.shape != (shape.num_vertices,):
        raise DomainError("truncated field file")
    return shape, vals


def write_coupled_csv(path: Path, triple: CoupledTriple) -> None:
    cols = np.column_stack([triple.L.values, triple.h.values, triple.h_tilde.values])
    write_field_csv(path, cols, ("vertex_index", "L", "h", "h_tilde"))


# -- extremal output ---------------------------------------------------------


def extremal_rows(sample: ExtremalSample, offset: int = 0) -> Iterable[list]:
    for rep, th, ht, prof in zip(sample.replica, sample.theta, sample.height, sample.profile):
        yield [int(rep) + offset, th, ht, *prof]


def write_extremal_csv(path: Path, sample: ExtremalSample) -> None:
    r = sample.profile.shape[1] if sample.profile.ndim == 2 else 0
    cols = ["replica_id", "theta", "height", *[f"profile_{j}" for j in range(r)]]
    write_table(path, cols, extremal_rows(sample))


def write_measure_csv(path: Path, measure: WeightedMeasure) -> None:
    write_table(path, ("location", "mass"), zip(measure.locations, measure.masses))


def curve_rows(curves) -> Iterable[list]:
    for c in curves:
        for t, e, s in zip(c.tgrid, c.estimate, c.stderr):
            yield [c.k, t, e, s]


CURVE_COLUMNS = ("k", "t", "estimate", "stderr")
