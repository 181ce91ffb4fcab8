"""Columnar dataset: CSV loading, type inference, roles, and discretization.

Columns are immutable numpy arrays: float64 with NaN for missing values
(numeric and datetime features, datetimes as integral UTC epoch seconds) and
object arrays with None for missing categorical cells.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, EmptyInputError, ParseError, SchemaError

logger = logging.getLogger(__name__)

CATEGORICAL = "categorical"
NUMERIC = "numeric"
DATETIME = "datetime"
KINDS = (CATEGORICAL, NUMERIC, DATETIME)

TARGET = "target"
CONTEXT = "context"
ROLES = (TARGET, CONTEXT)

MISSING_TOKENS = {"", "na", "null"}

# Categorical features wider than this are skipped by base-predicate
# generation so n = sum(b_i) stays bounded.
MAX_CATEGORICAL_CARDINALITY = 1_000

DEFAULT_BIN_COUNT = 20


@dataclass(frozen=True)
class FeatureSchema:
    name: str
    kind: str
    role: str = CONTEXT
    cardinality: int = 1  # b_i: distinct values (categorical) or bin count

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown feature kind {self.kind!r}")
        if self.role not in ROLES:
            raise SchemaError(f"unknown feature role {self.role!r}")
        if self.cardinality < 1:
            raise SchemaError(f"feature {self.name!r} has cardinality < 1")


@dataclass(frozen=True)
class BinningSpec:
    """Equal-width binning; per-feature overrides by name."""

    bin_count: int = DEFAULT_BIN_COUNT
    overrides: Mapping[str, int] = field(default_factory=dict)

    def count_for(self, feature: str) -> int:
        count = self.overrides.get(feature, self.bin_count)
        if count < 1:
            raise ConfigError(f"bin count for {feature!r} must be >= 1, got {count}")
        return count


@dataclass(frozen=True)
class NumericBins:
    """Contiguous half-open intervals [e_i, e_{i+1}); the last one is closed."""

    edges: tuple[float, ...]

    @property
    def degenerate(self) -> bool:
        return len(self.edges) == 2 and self.edges[0] == self.edges[1]

    def intervals(self):
        last = len(self.edges) - 2
        for i in range(len(self.edges) - 1):
            yield self.edges[i], self.edges[i + 1], i == last

    @property
    def width(self) -> float:
        return self.edges[1] - self.edges[0]


@dataclass(frozen=True)
class CategoricalBins:
    values: tuple[str, ...]


def parse_datetime(text: str) -> float:
    """ISO-8601 text -> integral UTC epoch seconds. Raises ValueError."""
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return float(int(dt.timestamp()))


def format_epoch(epoch: float) -> str:
    dt = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    return dt.strftime("%Y-%m-%d %H:%M:%S")


def _is_missing(cell: str) -> bool:
    return cell.strip().lower() in MISSING_TOKENS


def _parses_numeric(cell: str) -> bool:
    try:
        value = float(cell)
    except ValueError:
        return False
    return np.isfinite(value)


def _parses_datetime(cell: str) -> bool:
    try:
        parse_datetime(cell.strip())
    except ValueError:
        return False
    return True


class Dataset:
    """Immutable columnar table with typed features and a target/context split."""

    def __init__(self, schema: Sequence[FeatureSchema], columns: Mapping[str, np.ndarray]):
        names = [f.name for f in schema]
        if len(set(names)) != len(names):
            raise SchemaError("feature names must be unique")
        if set(columns) != set(names):
            raise SchemaError("columns do not match schema")
        lengths = {len(columns[n]) for n in names}
        if len(lengths) > 1:
            raise SchemaError("columns have unequal lengths")
        self.schema = tuple(schema)
        self.n_rows = lengths.pop() if lengths else 0
        self._by_name = {f.name: f for f in self.schema}
        self._columns = {}
        for f in self.schema:
            col = np.asarray(columns[f.name])
            if f.kind in (NUMERIC, DATETIME):
                col = col.astype(np.float64)
                finite_or_nan = np.isfinite(col) | np.isnan(col)
                if not finite_or_nan.all():
                    bad = int(np.flatnonzero(~finite_or_nan)[0])
                    raise ParseError(f"non-finite value in feature {f.name!r}", row=bad)
            else:
                col = col.astype(object)
            col.setflags(write=False)
            self._columns[f.name] = col

    # -- lookup ------------------------------------------------------------

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.schema)

    def feature(self, name: str) -> FeatureSchema:
        try:
            return self._by_name[name]
        except KeyError:
            raise SchemaError(f"unknown feature {name!r}") from None

    def has_feature(self, name: str) -> bool:
        return name in self._by_name

    def column(self, name: str) -> np.ndarray:
        self.feature(name)
        return self._columns[name]

    def missing_mask(self, name: str) -> np.ndarray:
        col = self.column(name)
        if self.feature(name).kind == CATEGORICAL:
            return np.array([v is None for v in col], dtype=bool)
        return np.isnan(col)

    @property
    def row_ids(self) -> np.ndarray:
        return np.arange(self.n_rows)

    def target_features(self) -> tuple[FeatureSchema, ...]:
        return tuple(f for f in self.schema if f.role == TARGET)

    def context_features(self) -> tuple[FeatureSchema, ...]:
        return tuple(f for f in self.schema if f.role == CONTEXT)

    # -- derivation --------------------------------------------------------

    def with_roles(self, targets: Iterable[str]) -> "Dataset":
        wanted = list(targets)
        for name in wanted:
            self.feature(name)
        target_set = set(wanted)
        schema = tuple(
            replace(f, role=TARGET if f.name in target_set else CONTEXT) for f in self.schema
        )
        return Dataset(schema, self._columns)

    def drop_feature(self, name: str) -> "Dataset":
        self.feature(name)
        schema = tuple(f for f in self.schema if f.name != name)
        if not schema:
            raise SchemaError("cannot drop the only feature")
        cols = {f.name: self._columns[f.name] for f in schema}
        return Dataset(schema, cols)

    @classmethod
    def from_columns(
        cls,
        columns: Mapping[str, Sequence],
        kinds: Mapping[str, str],
        targets: Iterable[str] = (),
    ) -> "Dataset":
        """Build directly from typed columns (floats/epoch seconds/strings, None or NaN missing)."""
        target_set = set(targets)
        schema = []
        arrays = {}
        for name, values in columns.items():
            kind = kinds[name]
            role = TARGET if name in target_set else CONTEXT
            if kind == CATEGORICAL:
                arr = np.array(list(values), dtype=object)
                card = max(1, len({v for v in arr if v is not None}))
            else:
                arr = np.array(
                    [np.nan if v is None else float(v) for v in values], dtype=np.float64
                )
                card = DEFAULT_BIN_COUNT
            schema.append(FeatureSchema(name, kind, role, card))
            arrays[name] = arr
        return cls(schema, arrays)


# -- CSV loading ------------------------------------------------------------


def _read_rows(text: str):
    reader = csv.reader(io.StringIO(text))
    try:
        rows = list(reader)
    except csv.Error as exc:
        raise ParseError(f"malformed CSV: {exc}", row=getattr(reader, "line_num", None))
    return rows


def _infer_kind(cells: list[str]) -> str:
    observed = [c for c in cells if not _is_missing(c)]
    if not observed:
        return CATEGORICAL
    if all(_parses_numeric(c) for c in observed):
        return NUMERIC
    if all(_parses_datetime(c) for c in observed):
        return DATETIME
    return CATEGORICAL


def _convert_column(name: str, kind: str, cells: list[str]) -> np.ndarray:
    if kind == CATEGORICAL:
        return np.array(
            [None if _is_missing(c) else c.strip() for c in cells], dtype=object
        )
    out = np.empty(len(cells), dtype=np.float64)
    for i, cell in enumerate(cells):
        if _is_missing(cell):
            out[i] = np.nan
            continue
        try:
            out[i] = float(cell) if kind == NUMERIC else parse_datetime(cell.strip())
        except ValueError:
            raise ParseError(
                f"cell {cell!r} in feature {name!r} does not parse as {kind}",
                row=i,
                column=name,
            ) from None
    return out


def load_csv_text(text: str, schema_hints: Mapping[str, Mapping[str, str]] | None = None) -> Dataset:
    """Parse CSV text (header row required) into a Dataset.

    Kinds are inferred per column: numeric if every non-missing cell parses as
    a real, else datetime if every cell parses as ISO-8601, else categorical.
    Roles default to context. ``schema_hints`` maps feature name to
    ``{"kind": ..., "role": ...}`` overrides.
    """
    rows = _read_rows(text)
    rows = [r for r in rows if r]  # tolerate blank lines
    if not rows:
        raise EmptyInputError("no header row")
    header, data = rows[0], rows[1:]
    header = [h.strip() for h in header]
    if len(set(header)) != len(header):
        raise SchemaError("duplicate feature names in header")
    if not data:
        raise EmptyInputError("no data rows")
    for i, row in enumerate(data):
        if len(row) != len(header):
            raise ParseError(
                f"row {i + 1} has {len(row)} fields, expected {len(header)}", row=i + 1
            )
    hints = schema_hints or {}
    for name in hints:
        if name not in header:
            raise SchemaError(f"schema hint for unknown feature {name!r}")

    schema = []
    columns = {}
    for j, name in enumerate(header):
        cells = [row[j] for row in data]
        hint = hints.get(name, {})
        kind = hint.get("kind") or _infer_kind(cells)
        role = hint.get("role", CONTEXT)
        col = _convert_column(name, kind, cells)
        if kind == CATEGORICAL:
            card = max(1, len({v for v in col if v is not None}))
        else:
            card = DEFAULT_BIN_COUNT
        schema.append(FeatureSchema(name, kind, role, card))
        columns[name] = col
    return Dataset(schema, columns)


def load_csv(path, schema_hints: Mapping[str, Mapping[str, str]] | None = None) -> Dataset:
    text = Path(path).read_text()
    if text.strip() == "":
        raise EmptyInputError(f"{path} is empty")
    return load_csv_text(text, schema_hints)


def load_schema_hints(path) -> dict:
    """Schema hints file: JSON mapping feature name -> {kind, role}."""
    with open(path) as fh:
        hints = json.load(fh)
    if not isinstance(hints, dict):
        raise SchemaError("schema hints must be a JSON object")
    return hints


def set_roles(ds: Dataset, targets: Iterable[str]) -> Dataset:
    """Mark the named features as targets; every other feature becomes context."""
    return ds.with_roles(targets)


# -- discretization ----------------------------------------------------------


def discretize(
    ds: Dataset, spec: BinningSpec | None = None, features: Iterable[str] | None = None
) -> dict[str, NumericBins | CategoricalBins]:
    """Per-feature bin table: equal-width edges for numeric/datetime features,
    the sorted distinct value list for categorical ones.

    A constant numeric column yields the single degenerate bin [v, v].
    """
    if ds.n_rows == 0:
        raise EmptyInputError("cannot discretize an empty dataset")
    spec = spec or BinningSpec()
    names = list(features) if features is not None else list(ds.feature_names)
    table = {}
    for name in names:
        feat = ds.feature(name)
        col = ds.column(name)
        if feat.kind == CATEGORICAL:
            values = sorted({v for v in col if v is not None})
            table[name] = CategoricalBins(tuple(values))
            continue
        count = spec.count_for(name)
        observed = col[~np.isnan(col)]
        if observed.size == 0:
            continue  # all-missing column: nothing to bin
        lo, hi = float(observed.min()), float(observed.max())
        if lo == hi:
            table[name] = NumericBins((lo, hi))
            continue
        edges = np.linspace(lo, hi, count + 1)
        table[name] = NumericBins(tuple(float(e) for e in edges))
    return table
