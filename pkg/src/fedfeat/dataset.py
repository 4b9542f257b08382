"""Tabular datasets, vertical partitioning and fold utilities."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError

NUMERIC = "numeric"
DISCRETE = "discrete"


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.array(values, copy=True)
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class Column:
    name: str
    kind: str
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _frozen(self.values))


@dataclass(frozen=True)
class FeatureColumn:
    """A named numeric feature vector and the node that owns it."""

    name: str
    values: np.ndarray
    owner: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _frozen(np.asarray(self.values, dtype=np.float64)))


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple[Column, ...]
    label: np.ndarray
    n_classes: int
    class_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "label", _frozen(np.asarray(self.label, dtype=np.int64)))
        rows = len(self.label)
        if rows == 0:
            raise DataError(f"{self.name}: table is empty")
        for col in self.columns:
            if len(col.values) != rows:
                raise DataError(f"{self.name}: column {col.name!r} has {len(col.values)} rows, expected {rows}")
        if self.n_classes < 2:
            raise DataError(f"{self.name}: label needs at least 2 distinct values")
        if set(np.unique(self.label).tolist()) != set(range(self.n_classes)):
            raise DataError(f"{self.name}: class ids must be dense in 0..{self.n_classes - 1}")

    @property
    def rows(self) -> int:
        return len(self.label)

    @property
    def numeric_names(self) -> list[str]:
        return [c.name for c in self.columns if c.kind == NUMERIC]

    def column(self, name: str) -> Column:
        for col in self.columns:
            if col.name == name:
                return col
        raise DataError(f"{self.name}: unknown column {name!r}")

    def numeric_matrix(self, names: Sequence[str] | None = None) -> np.ndarray:
        names = self.numeric_names if names is None else list(names)
        if not names:
            return np.empty((self.rows, 0))
        return np.column_stack([self.column(n).values for n in names]).astype(np.float64)

    def subset_rows(self, index: np.ndarray, name: str | None = None) -> "Table":
        """Row subset; class ids are re-densified if a class disappears."""
        index = np.asarray(index)
        label = self.label[index]
        present = np.unique(label)
        remap = {int(c): i for i, c in enumerate(present)}
        return Table(
            name=name or self.name,
            columns=tuple(Column(c.name, c.kind, c.values[index]) for c in self.columns),
            label=np.array([remap[int(v)] for v in label]),
            n_classes=len(present),
            class_names=tuple(self.class_names[int(c)] for c in present) if self.class_names else (),
        )


@dataclass(frozen=True)
class PartyView:
    """What one vertical participant holds: its own columns and the shared label."""

    party_id: int
    name: str
    features: tuple[FeatureColumn, ...]
    label: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "label", _frozen(np.asarray(self.label, dtype=np.int64)))

    @property
    def feature_names(self) -> list[str]:
        return [f.name for f in self.features]

    @property
    def rows(self) -> int:
        return len(self.label)


def _parse_float(cell: str) -> float | None:
    try:
        return float(cell)
    except ValueError:
        return None


def _label_order(raw: list[str]) -> list[str]:
    distinct = set(raw)
    parsed = {v: _parse_float(v) for v in distinct}
    if all(p is not None for p in parsed.values()):
        return sorted(distinct, key=lambda v: (parsed[v], v))
    return sorted(distinct)


def load_table(path: str | Path, label_column: str = "label", name: str | None = None) -> Table:
    """Read a UTF-8 CSV with a header row into a :class:`Table`.

    A column is numeric iff every cell parses as a real. A column mixing
    numbers and empty cells is rejected since no imputation is done; any
    other column becomes discrete with dense category ids.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: empty file")
    header, body = rows[0], [r for r in rows[1:] if r]
    if label_column not in header:
        raise DataError(f"{path}: label column {label_column!r} not found")
    if not body:
        raise DataError(f"{path}: table has no data rows")
    for i, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise DataError(f"{path}:{i}: expected {len(header)} cells, got {len(r)}")

    label_idx = header.index(label_column)
    raw_label = [r[label_idx].strip() for r in body]
    order = _label_order(raw_label)
    if len(order) < 2:
        raise DataError(f"{path}: label column has fewer than 2 distinct values")
    ids = {v: i for i, v in enumerate(order)}

    columns = []
    for j, col_name in enumerate(header):
        if j == label_idx:
            continue
        cells = [r[j].strip() for r in body]
        parsed = [_parse_float(c) if c else None for c in cells]
        non_empty = [p for c, p in zip(cells, parsed) if c]
        if non_empty and all(p is not None for p in non_empty):
            if len(non_empty) != len(cells):
                raise DataError(f"{path}: numeric column {col_name!r} has empty cells")
            values = np.array(parsed, dtype=np.float64)
            if not np.all(np.isfinite(values)):
                raise DataError(f"{path}: numeric column {col_name!r} has non-finite values")
            columns.append(Column(col_name, NUMERIC, values))
        else:
            cats = {c: i for i, c in enumerate(sorted(set(cells)))}
            columns.append(Column(col_name, DISCRETE, np.array([cats[c] for c in cells], dtype=np.int64)))

    return Table(
        name=name or path.stem,
        columns=tuple(columns),
        label=np.array([ids[v] for v in raw_label], dtype=np.int64),
        n_classes=len(order),
        class_names=tuple(order),
    )


def load_partition(path: str | Path) -> dict[str, list[str]]:
    """Read a partition document: ``{party name: [feature names]}``."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read partition {path}: {exc}") from exc
    if not isinstance(doc, dict) or not all(isinstance(v, list) for v in doc.values()):
        raise ConfigError(f"{path}: partition must map party name -> list of feature names")
    return {str(k): [str(x) for x in v] for k, v in doc.items()}


def vertical_split(
    table: Table, assignment: Mapping[str, Iterable[str]] | Sequence[Iterable[str]]
) -> list[PartyView]:
    """Split ``table`` column-wise among parties that share every row.

    ``assignment`` is either a mapping party name -> feature names or a plain
    sequence of feature-name collections (parties are then named ``p0``, ``p1``...).
    """
    if isinstance(assignment, Mapping):
        items = [(str(k), list(v)) for k, v in assignment.items()]
    else:
        items = [(f"p{i}", list(v)) for i, v in enumerate(assignment)]

    seen: dict[str, str] = {}
    views = []
    for k, (party, names) in enumerate(items):
        feats = []
        for n in names:
            if n in seen:
                raise ConfigError(f"feature {n!r} assigned to both {seen[n]!r} and {party!r}")
            seen[n] = party
            col = table.column(n)
            if col.kind != NUMERIC:
                raise ConfigError(f"feature {n!r} is discrete and cannot be assigned")
            feats.append(FeatureColumn(n, col.values, owner=party))
        views.append(PartyView(party_id=k, name=party, features=tuple(feats), label=table.label))
    return views


def search_space_size(m_per_party: Sequence[int], b: int) -> int:
    """Number of cross-party binary candidates: b/2 * ((sum m)^2 - sum m^2)."""
    total = sum(m_per_party)
    squares = sum(m * m for m in m_per_party)
    return b * (total * total - squares) // 2


def kfold_indices(rows: int, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Shuffled (not stratified) k-fold split; the first ``rows % k`` folds get one extra row."""
    if k < 2:
        raise ConfigError("k must be at least 2")
    if rows < k:
        raise DataError(f"cannot make {k} folds from {rows} rows")
    perm = np.random.default_rng(seed).permutation(rows)
    sizes = np.full(k, rows // k)
    sizes[: rows % k] += 1
    folds = []
    start = 0
    for size in sizes:
        test = np.sort(perm[start : start + size])
        mask = np.ones(rows, dtype=bool)
        mask[test] = False
        folds.append((np.flatnonzero(mask), test))
        start += size
    return folds


def bundled_data_dir() -> Path:
    return Path(__file__).with_name("data")


def bundled_datasets() -> list[str]:
    return sorted(p.stem for p in bundled_data_dir().glob("*.csv"))


def load_bundled(name: str) -> tuple[Table, dict[str, list[str]]]:
    """Load a bundled dataset together with its default partition."""
    base = bundled_data_dir()
    table = load_table(base / f"{name}.csv")
    return table, load_partition(base / f"{name}.partition.json")

