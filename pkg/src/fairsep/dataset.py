"""Typed tabular ingestion, feature encoding, and privilege/effort thresholds.

A Table is an immutable columnar dataset described by a Schema.  Column kinds:

* ``protected``   categorical column naming demographic groups (>= 2 levels)
* ``categorical`` unordered string column
* ``ordinal``     numeric column with a meaningful order
* ``numerical``   numeric column
* ``target``      binary outcome, stored as 0/1

``privilege`` and ``effort`` are tags layered on a numerical or ordinal
column; they mark the columns the socio-economic notions read.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateThresholdError, ParseError, SchemaError

log = logging.getLogger(__name__)

KINDS = ("protected", "categorical", "ordinal", "numerical", "target")
TAGS = ("privilege", "effort")
NUMERIC_KINDS = ("ordinal", "numerical")

# Effort scopes, ordered from coarse to fine; a cell with fewer than
# MIN_CELL_ROWS rows inherits the mean of its parent scope.
EFFORT_SCOPES = ("global", "per_group", "per_category_group")
MIN_CELL_ROWS = 2


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str
    tags: tuple[str, ...] = ()
    positive_label: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")
        for tag in self.tags:
            if tag not in TAGS:
                raise SchemaError(f"column {self.name!r}: unknown tag {tag!r}")
            if self.kind not in NUMERIC_KINDS:
                raise SchemaError(
                    f"column {self.name!r}: tag {tag!r} requires an ordinal or "
                    f"numerical column, got kind {self.kind!r}"
                )
        if self.positive_label is not None and self.kind != "target":
            raise SchemaError(f"column {self.name!r}: positive_label is a target-only field")


@dataclass(frozen=True)
class Schema:
    columns: tuple[ColumnSpec, ...]
    missing_marker: str = "?"
    delimiter: str = ","

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names in schema")
        targets = [c for c in self.columns if c.kind == "target"]
        if len(targets) != 1:
            raise SchemaError(f"schema needs exactly one target column, found {len(targets)}")

    def __getitem__(self, name: str) -> ColumnSpec:
        for c in self.columns:
            if c.name == name:
                return c
        raise SchemaError(f"no column {name!r} in schema")

    @property
    def target(self) -> ColumnSpec:
        return next(c for c in self.columns if c.kind == "target")

    @property
    def protected(self) -> ColumnSpec | None:
        return next((c for c in self.columns if c.kind == "protected"), None)

    def tagged(self, tag: str) -> ColumnSpec | None:
        hits = [c for c in self.columns if tag in c.tags]
        if len(hits) > 1:
            raise SchemaError(f"tag {tag!r} appears on more than one column")
        return hits[0] if hits else None

    @classmethod
    def from_dict(cls, doc: dict) -> "Schema":
        try:
            raw_cols = doc["columns"]
        except (KeyError, TypeError):
            raise SchemaError("schema document needs a 'columns' list")
        cols = []
        for raw in raw_cols:
            cols.append(
                ColumnSpec(
                    name=raw["name"],
                    kind=raw["kind"],
                    tags=tuple(raw.get("tags", ())),
                    positive_label=raw.get("positive_label"),
                )
            )
        return cls(
            columns=tuple(cols),
            missing_marker=doc.get("missing_marker", "?"),
            delimiter=doc.get("delimiter", ","),
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "Schema":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


class Table:
    """Immutable columnar dataset; numeric columns are float64, target is int64."""

    def __init__(self, schema: Schema, columns: dict[str, np.ndarray], dropped_rows: int = 0):
        self.schema = schema
        self._columns = {}
        lengths = {len(v) for v in columns.values()}
        if len(lengths) > 1:
            raise SchemaError(f"ragged columns: lengths {sorted(lengths)}")
        self.rows = lengths.pop() if lengths else 0
        self.dropped_rows = dropped_rows
        for spec in schema.columns:
            if spec.name not in columns:
                raise SchemaError(f"column {spec.name!r} declared but not supplied")
            arr = columns[spec.name]
            if spec.kind in NUMERIC_KINDS:
                arr = np.asarray(arr, dtype=np.float64)
            elif spec.kind == "target":
                arr = np.asarray(arr, dtype=np.int64)
            else:
                arr = np.asarray(arr, dtype=object)
            arr.setflags(write=False)
            self._columns[spec.name] = arr
        self._validate()

    def _validate(self):
        y = self._columns[self.schema.target.name]
        if self.rows and not np.isin(y, (0, 1)).all():
            raise SchemaError("target column holds values outside {0, 1}")
        prot = self.schema.protected
        if prot is not None and self.rows and len(set(self._columns[prot.name])) < 2:
            raise SchemaError(f"protected column {prot.name!r} has fewer than 2 distinct values")

    def column(self, name: str) -> np.ndarray:
        try:
            return self._columns[name]
        except KeyError:
            raise SchemaError(f"no column {name!r} in table")

    @property
    def target(self) -> np.ndarray:
        return self._columns[self.schema.target.name]

    def levels(self, name: str) -> list[str]:
        """Sorted distinct values of a string column."""
        return sorted(set(self.column(name)))

    def take(self, index: np.ndarray) -> "Table":
        """New Table holding the rows selected by a boolean mask or index array."""
        cols = {name: arr[index].copy() for name, arr in self._columns.items()}
        return Table(self.schema, cols, dropped_rows=0)


def load_csv(path: str | Path, schema: Schema) -> Table:
    """Read a delimited file into a Table.

    Only the schema's columns are kept.  Rows holding the missing marker in any
    schema column are dropped and counted.  Fields are stripped of surrounding
    whitespace before use.  Target values are binarized: raw values equal to
    ``positive_label`` map to 1, everything else to 0; without a
    ``positive_label`` the raw values must already be 0/1.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file, header required")
        header = [h.strip() for h in header]
        missing = [c.name for c in schema.columns if c.name not in header]
        if missing:
            raise SchemaError(f"{path}: schema columns absent from header: {missing}")
        col_idx = {c.name: header.index(c.name) for c in schema.columns}

        raw: dict[str, list] = {c.name: [] for c in schema.columns}
        dropped = 0
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            values = {name: row[i].strip() for name, i in col_idx.items()}
            if any(v == schema.missing_marker for v in values.values()):
                dropped += 1
                continue
            for spec in schema.columns:
                v = values[spec.name]
                if spec.kind in NUMERIC_KINDS:
                    try:
                        raw[spec.name].append(float(v))
                    except ValueError:
                        raise ParseError(
                            f"{path}:{lineno}: column {spec.name!r}: "
                            f"not a number: {v!r}"
                        )
                elif spec.kind == "target":
                    raw[spec.name].append(_binarize(v, spec, path, lineno))
                else:
                    raw[spec.name].append(v)

    if dropped:
        log.info("%s: dropped %d rows containing missing marker %r", path, dropped, schema.missing_marker)
    cols = {name: np.asarray(vals, dtype=object) for name, vals in raw.items()}
    return Table(schema, cols, dropped_rows=dropped)


def _binarize(value: str, spec: ColumnSpec, path, lineno: int) -> int:
    if spec.positive_label is not None:
        return 1 if value == spec.positive_label else 0
    if value in ("0", "1"):
        return int(value)
    raise ParseError(
        f"{path}:{lineno}: target {spec.name!r} value {value!r} is not 0/1 "
        f"and the schema names no positive_label"
    )


def write_csv(table: Table, path: str | Path) -> None:
    """Serialize a Table back to CSV (round-trips with load_csv)."""
    names = [c.name for c in table.schema.columns]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=table.schema.delimiter)
        writer.writerow(names)
        cols = [table.column(n) for n in names]
        specs = [table.schema[n] for n in names]
        for i in range(table.rows):
            row = []
            for spec, col in zip(specs, cols):
                v = col[i]
                if spec.kind in NUMERIC_KINDS:
                    row.append(repr(float(v)))
                else:
                    row.append(str(v))
            writer.writerow(row)


# ---------------------------------------------------------------------------
# Thresholds
# ---------------------------------------------------------------------------

@dataclass
class Thresholds:
    """Privilege cutoff and effort threshold(s) parameterizing the notions.

    ``effort`` maps a scope cell key to the mean effort in that cell:
    ``()`` for global scope, ``(group,)`` for per_group,
    ``(category, group)`` for per_category_group.
    """

    privilege_cutoff: float | None = None
    p: float | None = None
    realized_fraction: float | None = None
    effort_scope: str | None = None
    effort_column: str | None = None
    category_column: str | None = None
    effort: dict[tuple, float] = field(default_factory=dict)
    fallbacks: list[str] = field(default_factory=list)

    def effort_at(self, cell: tuple) -> float:
        """Effort threshold for a cell, trimming the key to the stored scope."""
        if self.effort_scope == "global":
            return self.effort[()]
        if self.effort_scope == "per_group":
            return self.effort[cell[-1:]]
        return self.effort[cell]


def privilege_threshold(table: Table, p: float, column: str | None = None) -> Thresholds:
    """Smallest observed value whose tail {x >= v} holds at most p% of rows.

    The realized privileged fraction is recorded; under heavy ties it can sit
    strictly below p/100.
    """
    if not 0 < p < 100:
        raise ValueError(f"p must lie in (0, 100), got {p}")
    if column is None:
        spec = table.schema.tagged("privilege")
        if spec is None:
            raise SchemaError("no column tagged 'privilege' and none named")
        column = spec.name
    x = table.column(column)
    if table.rows == 0:
        raise DegenerateThresholdError("empty table")
    values = np.sort(np.unique(x))
    if len(values) < 2:
        raise DegenerateThresholdError(
            f"column {column!r} is constant; privileged set would be everything"
        )
    n = table.rows
    xs = np.sort(x)
    for v in values:
        tail = n - np.searchsorted(xs, v, side="left")
        frac = tail / n
        if frac <= p / 100.0:
            return Thresholds(privilege_cutoff=float(v), p=p, realized_fraction=float(frac))
    raise DegenerateThresholdError(
        f"column {column!r}: no observed cutoff reaches a top fraction <= {p}% "
        f"(smallest attainable tail is {np.mean(xs == values[-1]):.4f})"
    )


def effort_threshold(
    table: Table,
    scope: str,
    column: str | None = None,
    category_column: str | None = None,
) -> Thresholds:
    """Mean effort per scope cell; cells with < 2 rows inherit the parent mean.

    Scope chain: per_category_group cells fall back to the per_group mean of
    their group, per_group cells fall back to the global mean.
    """
    if scope not in EFFORT_SCOPES:
        raise ValueError(f"unknown effort scope {scope!r}")
    if column is None:
        spec = table.schema.tagged("effort")
        if spec is None:
            raise SchemaError("no column tagged 'effort' and none named")
        column = spec.name
    if table.rows == 0:
        raise SchemaError("cannot compute effort thresholds on an empty table")
    x = table.column(column)
    out = Thresholds(effort_scope=scope, effort_column=column, category_column=category_column)
    global_mean = float(np.mean(x))
    if scope == "global":
        out.effort[()] = global_mean
        return out

    prot = table.schema.protected
    if prot is None:
        raise SchemaError(f"effort scope {scope!r} needs a protected column")
    groups = table.column(prot.name)
    group_means: dict[str, float] = {}
    for g in table.levels(prot.name):
        cell = x[groups == g]
        if len(cell) < MIN_CELL_ROWS:
            group_means[g] = global_mean
            out.fallbacks.append(f"group {g!r}: {len(cell)} rows, using global mean")
        else:
            group_means[g] = float(np.mean(cell))
    if scope == "per_group":
        out.effort = {(g,): m for g, m in group_means.items()}
        return out

    if category_column is None:
        raise SchemaError("per_category_group scope needs a category column")
    cats = table.column(category_column)
    for a in table.levels(category_column):
        for g in table.levels(prot.name):
            cell = x[(cats == a) & (groups == g)]
            if len(cell) < MIN_CELL_ROWS:
                out.effort[(a, g)] = group_means[g]
                out.fallbacks.append(
                    f"cell ({a!r}, {g!r}): {len(cell)} rows, using group mean"
                )
            else:
                out.effort[(a, g)] = float(np.mean(cell))
    return out


def resolve_thresholds(
    table: Table,
    p: float,
    effort_scope: str,
    privilege_column: str | None = None,
    effort_column: str | None = None,
    category_column: str | None = None,
) -> Thresholds:
    """Privilege cutoff and effort thresholds combined into one record."""
    priv = privilege_threshold(table, p, privilege_column)
    eff = effort_threshold(table, effort_scope, effort_column, category_column)
    eff.privilege_cutoff = priv.privilege_cutoff
    eff.p = priv.p
    eff.realized_fraction = priv.realized_fraction
    return eff


# ---------------------------------------------------------------------------
# Feature encoding
# ---------------------------------------------------------------------------

@dataclass
class FeatureEncoder:
    """One-hot + standardization encoder fitted on training-split statistics.

    ``feature_map`` lists, per output column, the source column and the level
    it indicates (None for standardized numeric columns).
    """

    feature_map: list[tuple[str, str | None]]
    levels: dict[str, list[str]]
    means: dict[str, float]
    sds: dict[str, float]
    include_protected: bool

    @property
    def width(self) -> int:
        return len(self.feature_map)

    @classmethod
    def fit(cls, table: Table, train_mask: np.ndarray | None = None,
            include_protected: bool = False) -> "FeatureEncoder":
        if train_mask is None:
            train_mask = np.ones(table.rows, dtype=bool)
        feature_map: list[tuple[str, str | None]] = []
        levels: dict[str, list[str]] = {}
        means: dict[str, float] = {}
        sds: dict[str, float] = {}
        for spec in table.schema.columns:
            if spec.kind == "target":
                continue
            if spec.kind == "protected" and not include_protected:
                continue
            col = table.column(spec.name)[train_mask]
            if spec.kind in NUMERIC_KINDS:
                mu = float(np.mean(col)) if len(col) else 0.0
                sd = float(np.std(col)) if len(col) else 0.0
                if sd == 0.0:
                    log.warning("column %r is constant on the training split; "
                                "it encodes to zeros", spec.name)
                    sd = 1.0
                means[spec.name] = mu
                sds[spec.name] = sd
                feature_map.append((spec.name, None))
            else:
                lv = sorted(set(col))
                if len(lv) < 2:
                    log.warning("categorical column %r has %d level(s) on the "
                                "training split; dropped", spec.name, len(lv))
                    continue
                levels[spec.name] = lv
                for v in lv:
                    feature_map.append((spec.name, v))
        return cls(feature_map, levels, means, sds, include_protected)

    def transform(self, table: Table, mask: np.ndarray | None = None) -> np.ndarray:
        n = table.rows if mask is None else int(np.count_nonzero(mask))
        X = np.zeros((n, self.width))
        for j, (name, level) in enumerate(self.feature_map):
            col = table.column(name)
            if mask is not None:
                col = col[mask]
            if level is None:
                X[:, j] = (col.astype(np.float64) - self.means[name]) / self.sds[name]
            else:
                X[:, j] = (col == level).astype(np.float64)
        return X


def encode_features(
    table: Table,
    train_mask: np.ndarray | None = None,
    include_protected: bool = False,
) -> tuple[np.ndarray, FeatureEncoder]:
    """Encode the whole table; statistics come from train_mask rows only."""
    enc = FeatureEncoder.fit(table, train_mask, include_protected)
    return enc.transform(table), enc


def stratified_split(table: Table, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Boolean (train, test) masks stratified by (protected group, target)."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0, 1)")
    prot = table.schema.protected
    y = table.target
    if prot is not None:
        keys = [f"{g}|{t}" for g, t in zip(table.column(prot.name), y)]
    else:
        keys = [str(t) for t in y]
    keys = np.asarray(keys, dtype=object)
    rng = np.random.default_rng(seed)
    test = np.zeros(table.rows, dtype=bool)
    for key in sorted(set(keys)):
        idx = np.flatnonzero(keys == key)
        rng.shuffle(idx)
        n_test = int(round(len(idx) * test_fraction))
        test[idx[:n_test]] = True
    return ~test, test
