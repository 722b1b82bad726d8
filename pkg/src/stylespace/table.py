"""Feature tables: utterances x named features, CSV in and out.

Missing values are NaN in memory and empty cells on disk. Export formats
floats with repr so that import(export(T)) == T bit-for-bit for finite
values.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class TableError(ValueError):
    pass


@dataclass
class FeatureTable:
    ids: list[str]
    names: list[str]
    values: np.ndarray  # rows = utterances, NaN = missing

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.ids), len(self.names)):
            raise TableError("values shape does not match ids x names")
        if len(set(self.ids)) != len(self.ids):
            raise TableError("duplicate utterance ids")
        if len(set(self.names)) != len(self.names):
            raise TableError("duplicate feature names")

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.names.index(name)
        except ValueError:
            raise TableError(f"unknown feature: {name}") from None
        return self.values[:, j]

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureTable):
            return NotImplemented
        if self.ids != other.ids or self.names != other.names:
            return False
        a, b = self.values, other.values
        return bool(np.all((a == b) | (np.isnan(a) & np.isnan(b))))


def from_rows(rows: dict[str, dict[str, float]]) -> FeatureTable:
    """Build a table from {utterance id: {feature name: value}}."""
    ids = list(rows)
    names = sorted({n for r in rows.values() for n in r})
    values = np.full((len(ids), len(names)), np.nan)
    for i, uid in enumerate(ids):
        for j, name in enumerate(names):
            if name in rows[uid]:
                values[i, j] = rows[uid][name]
    return FeatureTable(ids=ids, names=names, values=values)


def import_feature_table(path: str | Path) -> FeatureTable:
    """Read a CSV with header row; first column is the utterance id."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise TableError(f"{path}: empty file") from None
        if len(header) < 2:
            raise TableError(f"{path}: no feature columns")
        names = header[1:]
        ids: list[str] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise TableError(f"{path}:{lineno}: ragged row")
            ids.append(row[0])
            parsed = []
            for cell in row[1:]:
                cell = cell.strip()
                if cell == "":
                    parsed.append(np.nan)
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    v = np.nan  # non-numeric cell -> missing
                parsed.append(v if np.isfinite(v) else np.nan)
            rows.append(parsed)
    if len(set(ids)) != len(ids):
        dupes = sorted({u for u in ids if ids.count(u) > 1})
        raise TableError(f"{path}: duplicate ids: {dupes}")
    values = np.asarray(rows, dtype=np.float64).reshape(len(ids), len(names))
    return FeatureTable(ids=ids, names=names, values=values)


def export_feature_table(table: FeatureTable, path: str | Path) -> None:
    """Write a table as CSV; missing values become empty cells."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["id"] + table.names)
        for i, uid in enumerate(table.ids):
            row = [uid]
            for v in table.values[i]:
                row.append("" if np.isnan(v) else repr(float(v)))
            writer.writerow(row)
