"""Tabular ingestion: CSV loading with column-kind inference, one-hot
expansion, threshold binarization, and stable row ids.

Datasets are immutable after construction. Row ids are assigned once at load
(0-based) and survive filtering, so cohorts can always be traced back to the
source table.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    AllMissingError,
    ColumnKindError,
    EmptyDatasetError,
    NotCategoricalError,
    ParseError,
    StaleIdsError,
    UnknownColumnError,
)

log = logging.getLogger(__name__)

_TRUTHY_PAIRS = (("no", "yes"), ("false", "true"))


class ColumnKind(str, Enum):
    BINARY = "binary"
    CONTINUOUS = "continuous"
    CATEGORICAL = "categorical"


@dataclass(frozen=True)
class Column:
    """One typed column.

    Binary values are 0/1 floats; ``labels`` remembers the original string
    levels (label for 0, label for 1) when a binary column was inferred from
    strings such as yes/no. Continuous values may contain NaN for missing
    cells. Categorical values are strings.
    """

    name: str
    kind: ColumnKind
    values: np.ndarray
    labels: tuple[str, str] | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values))
        if self.kind is ColumnKind.BINARY:
            vals = self.values.astype(float)
            if not np.isin(vals, (0.0, 1.0)).all():
                raise ParseError(f"binary column {self.name!r} contains values outside 0/1")
            object.__setattr__(self, "values", vals)
        elif self.kind is ColumnKind.CONTINUOUS:
            object.__setattr__(self, "values", self.values.astype(float))

    @property
    def n_missing(self) -> int:
        if self.kind is ColumnKind.CONTINUOUS:
            return int(np.isnan(self.values).sum())
        if self.kind is ColumnKind.CATEGORICAL:
            return int(sum(1 for v in self.values if v == ""))
        return 0

    def missing_mask(self) -> np.ndarray:
        if self.kind is ColumnKind.CONTINUOUS:
            return np.isnan(self.values)
        if self.kind is ColumnKind.CATEGORICAL:
            return np.array([v == "" for v in self.values], dtype=bool)
        return np.zeros(len(self.values), dtype=bool)


@dataclass(frozen=True)
class Dataset:
    columns: tuple[Column, ...]
    row_ids: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if not self.columns:
            raise EmptyDatasetError("dataset has no columns")
        lengths = {len(c.values) for c in self.columns}
        if len(lengths) != 1:
            raise ParseError(f"columns have differing lengths: {sorted(lengths)}")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ParseError("duplicate column names")
        n = lengths.pop()
        ids = self.row_ids
        if ids is None:
            ids = np.arange(n, dtype=np.int64)
        else:
            ids = np.asarray(ids, dtype=np.int64)
            if len(ids) != n:
                raise ParseError("row_ids length does not match columns")
            if np.any(np.diff(ids) <= 0):
                raise ParseError("row_ids must be strictly increasing")
        object.__setattr__(self, "row_ids", ids)

    @property
    def n_rows(self) -> int:
        return len(self.row_ids)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise UnknownColumnError(f"unknown column {name!r}")

    def has_column(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)

    def positions_of(self, ids: Sequence[int]) -> np.ndarray:
        """Map row ids to positional indices, raising on stale ids."""
        wanted = np.asarray(ids, dtype=np.int64)
        pos = np.searchsorted(self.row_ids, wanted)
        bad = (pos >= len(self.row_ids)) | (self.row_ids[np.clip(pos, 0, len(self.row_ids) - 1)] != wanted)
        if bad.any():
            missing = sorted(set(wanted[bad].tolist()))[:5]
            raise StaleIdsError(f"row ids not in dataset: {missing}")
        return pos

    def subset(self, ids: Iterable[int]) -> "Dataset":
        """Rows with the given ids, in ascending id order, keeping original ids."""
        unique = sorted(set(int(i) for i in ids))
        pos = self.positions_of(unique)
        cols = tuple(
            Column(c.name, c.kind, c.values[pos], c.labels) for c in self.columns
        )
        return Dataset(cols, np.asarray(unique, dtype=np.int64))

    def summary(self) -> dict:
        return {
            "columns": [
                {"name": c.name, "kind": c.kind.value, "n_missing": c.n_missing}
                for c in self.columns
            ],
            "n_rows": self.n_rows,
        }


# --- CSV loading ----------------------------------------------------------


def _coerce_kind(kind: object) -> ColumnKind:
    if isinstance(kind, ColumnKind):
        return kind
    try:
        return ColumnKind(str(kind).lower())
    except ValueError:
        raise ParseError(f"unknown column kind {kind!r}") from None


def _infer_column(name: str, raw: list[str]) -> Column:
    present = [v for v in raw if v != ""]
    has_missing = len(present) < len(raw)
    if not present:
        return Column(name, ColumnKind.CONTINUOUS, np.full(len(raw), np.nan))

    numeric = True
    parsed: list[float] = []
    for v in present:
        try:
            parsed.append(float(v))
        except ValueError:
            numeric = False
            break

    if numeric and present:
        if not has_missing and set(parsed) <= {0.0, 1.0}:
            return Column(name, ColumnKind.BINARY, np.array(parsed))
        values = np.array([float(v) if v != "" else np.nan for v in raw])
        return Column(name, ColumnKind.CONTINUOUS, values)

    lowered = {v.lower() for v in present}
    if not has_missing:
        for zero, one in _TRUTHY_PAIRS:
            if lowered <= {zero, one}:
                values = np.array([1.0 if v.lower() == one else 0.0 for v in raw])
                return Column(name, ColumnKind.BINARY, values, labels=(zero, one))
    return Column(name, ColumnKind.CATEGORICAL, np.array(raw, dtype=object))


def _force_kind(name: str, raw: list[str], kind: ColumnKind) -> Column:
    if kind is ColumnKind.CATEGORICAL:
        return Column(name, ColumnKind.CATEGORICAL, np.array(raw, dtype=object))
    if kind is ColumnKind.CONTINUOUS:
        values = []
        for v in raw:
            if v == "":
                values.append(np.nan)
                continue
            try:
                values.append(float(v))
            except ValueError:
                raise ParseError(f"column {name!r}: {v!r} is not numeric") from None
        return Column(name, ColumnKind.CONTINUOUS, np.array(values))
    # binary: accept 0/1 and the recognised string pairs
    values = np.empty(len(raw))
    labels: tuple[str, str] | None = None
    for i, v in enumerate(raw):
        low = v.lower()
        if low in ("0", "1"):
            values[i] = float(low)
        else:
            for zero, one in _TRUTHY_PAIRS:
                if low in (zero, one):
                    values[i] = 1.0 if low == one else 0.0
                    labels = (zero, one)
                    break
            else:
                raise ParseError(f"column {name!r}: {v!r} is not binary")
    return Column(name, ColumnKind.BINARY, values, labels=labels)


def load_csv(source, typing_overrides: Mapping[str, object] | None = None) -> Dataset:
    """Read a UTF-8 CSV with a header row into a typed Dataset.

    Kind inference per column: 0/1 (or yes/no, true/false case-insensitively)
    is binary, numeric-parseable is continuous, anything else categorical.
    Empty cells count as missing; a would-be binary column with missing cells
    loads as continuous with NaN. ``typing_overrides`` (name -> kind) wins
    over inference.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return load_csv(fh, typing_overrides)
    if isinstance(source, bytes):
        return load_csv(io.StringIO(source.decode("utf-8")), typing_overrides)

    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyDatasetError("empty CSV") from None
    header = [h.strip() for h in header]
    if len(set(header)) != len(header):
        raise ParseError("duplicate column headers")
    if not header or all(h == "" for h in header):
        raise EmptyDatasetError("CSV has no columns")

    rows: list[list[str]] = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue  # blank line
        if len(row) != len(header):
            raise ParseError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        rows.append([cell.strip() for cell in row])
    if not rows:
        raise EmptyDatasetError("CSV has no data rows")

    overrides = {k: _coerce_kind(v) for k, v in (typing_overrides or {}).items()}
    for name in overrides:
        if name not in header:
            raise UnknownColumnError(f"typing override for unknown column {name!r}")

    columns = []
    for j, name in enumerate(header):
        raw = [row[j] for row in rows]
        if name in overrides:
            columns.append(_force_kind(name, raw, overrides[name]))
        else:
            columns.append(_infer_column(name, raw))
    return Dataset(tuple(columns))


# --- transforms ------------------------------------------------------------


def one_hot(ds: Dataset, column: str) -> Dataset:
    """Replace a categorical (or string-inferred binary) column with k-1
    indicator columns named ``<col>=<level>``.

    The lexicographically smallest level is dropped as the reference, which
    keeps the propensity design matrix full-rank.
    """
    col = ds.column(column)
    if col.kind is ColumnKind.CATEGORICAL:
        levels = sorted({str(v) for v in col.values})
        as_strings = [str(v) for v in col.values]
    elif col.kind is ColumnKind.BINARY and col.labels is not None:
        levels = sorted(col.labels)
        as_strings = [col.labels[int(v)] for v in col.values]
    else:
        raise NotCategoricalError(f"column {column!r} is not categorical")

    indicators = [
        Column(f"{column}={level}", ColumnKind.BINARY,
               np.array([1.0 if v == level else 0.0 for v in as_strings]))
        for level in levels[1:]
    ]
    out = []
    for c in ds.columns:
        if c.name == column:
            out.extend(indicators)
        else:
            out.append(c)
    return Dataset(tuple(out), ds.row_ids)


def binarize_at(
    ds: Dataset,
    column: str,
    mode: str = "median",
    threshold: float | None = None,
) -> Dataset:
    """Replace a continuous column with a 0/1 column: 1 iff value >= threshold.

    ``mode`` is "median", "mean", or "value"; the first two compute the
    threshold from the data ignoring missing cells ("value" requires an
    explicit ``threshold``). Rows missing the column are dropped from the
    result, with the count logged.
    """
    col = ds.column(column)
    if col.kind is not ColumnKind.CONTINUOUS:
        raise ColumnKindError(f"column {column!r} is {col.kind.value}, not continuous")

    missing = col.missing_mask()
    present = col.values[~missing]
    if present.size == 0:
        raise AllMissingError(f"column {column!r} has no non-missing values")

    if mode == "median":
        cutoff = float(np.median(present))
    elif mode == "mean":
        cutoff = float(np.mean(present))
    elif mode == "value":
        if threshold is None:
            raise ParseError('mode "value" requires an explicit threshold')
        cutoff = float(threshold)
    else:
        raise ParseError(f"unknown binarize mode {mode!r}")

    keep = ~missing
    n_dropped = int(missing.sum())
    if n_dropped:
        log.info("binarize_at(%s): dropped %d rows with missing values", column, n_dropped)

    new_values = (col.values[keep] >= cutoff).astype(float)
    out = []
    for c in ds.columns:
        values = c.values[keep]
        if c.name == column:
            out.append(Column(c.name, ColumnKind.BINARY, new_values))
        else:
            out.append(Column(c.name, c.kind, values, c.labels))
    return Dataset(tuple(out), ds.row_ids[keep])


# --- numeric access helpers -------------------------------------------------


def numeric_matrix(ds: Dataset, names: Sequence[str]) -> np.ndarray:
    """Stack the named binary/continuous columns into an (n, k) float matrix."""
    cols = []
    for name in names:
        col = ds.column(name)
        if col.kind is ColumnKind.CATEGORICAL:
            raise ColumnKindError(
                f"column {name!r} is categorical; one-hot expand it first"
            )
        cols.append(col.values.astype(float))
    if not cols:
        return np.empty((ds.n_rows, 0))
    return np.column_stack(cols)


def drop_missing(ds: Dataset, names: Sequence[str]) -> tuple[Dataset, int]:
    """Complete-case filter over the named columns; returns (subset, n_dropped)."""
    mask = np.zeros(ds.n_rows, dtype=bool)
    for name in names:
        mask |= ds.column(name).missing_mask()
    if not mask.any():
        return ds, 0
    keep_ids = ds.row_ids[~mask]
    return ds.subset(keep_ids), int(mask.sum())


def binary_flags(ds: Dataset, name: str) -> np.ndarray:
    """0/1 vector of a binary column (for treatment indicators)."""
    col = ds.column(name)
    if col.kind is not ColumnKind.BINARY:
        raise ColumnKindError(f"column {name!r} is {col.kind.value}, not binary")
    return col.values.astype(float)
