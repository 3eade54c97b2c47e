"""Tabular ingestion and per-column ordering structures.

A RankFrame precomputes, for every column, the tie-group partition of the
rows (groups sorted by value). The Gibbs sweep only ever needs the extrema of
the two neighboring groups of a cell, so truncation bounds come out in O(1)
per cell once the groups are built.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

_MISSING_TOKENS = {"", "na", "nan", "null", "none"}


class ParseError(ValueError):
    pass


class RankConsistencyError(ValueError):
    def __init__(self, row, col, message=None):
        self.row = row
        self.col = col
        super().__init__(message or f"rank consistency violated at row {row}, column {col}")


@dataclass
class DataTable:
    values: np.ndarray  # (n, J) float64, no missing entries
    names: list

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ParseError("table must be two-dimensional")
        if self.values.shape[0] < 2:
            raise ParseError("table must have at least 2 rows")
        if not np.all(np.isfinite(self.values)):
            raise ParseError("table contains non-finite values")

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def n_cols(self):
        return self.values.shape[1]


def load_table(path, delimiter=",", header=True):
    """Parse a delimited numeric file; reject ragged rows and missing cells."""
    rows = []
    names = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for lineno, record in enumerate(reader, start=1):
            if not record:
                continue
            if header and names is None:
                names = [cell.strip() for cell in record]
                continue
            rows.append((lineno, record))
    if not rows:
        raise ParseError(f"{path}: no data rows")
    width = len(rows[0][1])
    if names is not None and len(names) != width:
        raise ParseError(f"{path}: header has {len(names)} fields, data rows have {width}")
    if names is None:
        names = [f"col{j + 1}" for j in range(width)]
    values = np.empty((len(rows), width))
    for r, (lineno, record) in enumerate(rows):
        if len(record) != width:
            raise ParseError(
                f"{path}: row at line {lineno} has {len(record)} fields, expected {width}"
            )
        for c, cell in enumerate(record):
            text = cell.strip()
            if text.lower() in _MISSING_TOKENS:
                raise ParseError(
                    f"{path}: missing value at line {lineno}, column {c + 1} ('{names[c]}')"
                )
            try:
                v = float(text)
            except ValueError:
                raise ParseError(
                    f"{path}: non-numeric cell '{text}' at line {lineno}, "
                    f"column {c + 1} ('{names[c]}')"
                ) from None
            if math.isnan(v):
                raise ParseError(
                    f"{path}: missing value at line {lineno}, column {c + 1} ('{names[c]}')"
                )
            values[r, c] = v
    return DataTable(values, names)


@dataclass
class ColumnRanks:
    """Tie-group structure of one column (groups in strictly increasing value order)."""

    distinct_values: np.ndarray  # (G,)
    group_of_row: np.ndarray  # (n,) int, group index of each row
    group_ptr: np.ndarray  # (G+1,) int offsets into rows_by_group
    rows_by_group: np.ndarray  # (n,) int, row indices sorted by (group, row)

    @property
    def n_groups(self):
        return self.distinct_values.shape[0]


class RankFrame:
    """A DataTable plus per-column tie-group indexes (immutable once built)."""

    def __init__(self, table, columns):
        self.table = table
        self.columns = columns
        self._sorted_values = [
            table.values[col.rows_by_group, j] for j, col in enumerate(columns)
        ]

    @property
    def n(self):
        return self.table.n

    @property
    def n_cols(self):
        return self.table.n_cols

    def empirical_quantile(self, j, u):
        return empirical_quantile(self._sorted_values[j], u)


def build_rank_frame(table):
    columns = []
    for j in range(table.n_cols):
        col = table.values[:, j]
        distinct, inverse = np.unique(col, return_inverse=True)
        inverse = inverse.astype(np.int64)
        counts = np.bincount(inverse, minlength=distinct.shape[0])
        ptr = np.zeros(distinct.shape[0] + 1, dtype=np.int64)
        np.cumsum(counts, out=ptr[1:])
        rows_by_group = np.argsort(inverse, kind="stable").astype(np.int64)
        columns.append(ColumnRanks(distinct, inverse, ptr, rows_by_group))
    return RankFrame(table, columns)


def empirical_quantile(sorted_values, u):
    """Generalized inverse of the empirical CDF over pre-sorted observations."""
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"quantile level {u} outside [0, 1]")
    n = len(sorted_values)
    k = max(1, math.ceil(n * u))
    return float(sorted_values[min(k, n) - 1])


def check_rank_consistent(frame, Z):
    """Raise RankConsistencyError at the first strict-order violation of Z."""
    Z = np.asarray(Z)
    for j, col in enumerate(frame.columns):
        if col.n_groups == 1:
            continue
        zs = Z[col.rows_by_group, j]
        gmax = np.maximum.reduceat(zs, col.group_ptr[:-1])
        gmin = np.minimum.reduceat(zs, col.group_ptr[:-1])
        bad = np.nonzero(gmax[:-1] >= gmin[1:])[0]
        if bad.size:
            g = int(bad[0])
            seg = slice(col.group_ptr[g + 1], col.group_ptr[g + 2])
            local = int(np.argmin(zs[seg]))
            row = int(col.rows_by_group[col.group_ptr[g + 1] + local])
            raise RankConsistencyError(row, j)


def is_rank_consistent(frame, Z):
    try:
        check_rank_consistent(frame, Z)
    except RankConsistencyError:
        return False
    return True
