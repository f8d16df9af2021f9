"""Typed columnar tables, CSV / NSL-KDD loaders, stratified splits and subsets."""
import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from metaselect.errors import DataError

NUMERIC = "numeric"
CATEGORICAL = "categorical"
KINDS = (NUMERIC, CATEGORICAL)

# 41 predictor fields of the NSL-KDD record layout, in file order.
NSLKDD_FEATURES = (
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes",
    "land", "wrong_fragment", "urgent", "hot", "num_failed_logins", "logged_in",
    "num_compromised", "root_shell", "su_attempted", "num_root",
    "num_file_creations", "num_shells", "num_access_files", "num_outbound_cmds",
    "is_host_login", "is_guest_login", "count", "srv_count", "serror_rate",
    "srv_serror_rate", "rerror_rate", "srv_rerror_rate", "same_srv_rate",
    "diff_srv_rate", "srv_diff_host_rate", "dst_host_count",
    "dst_host_srv_count", "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate", "dst_host_srv_serror_rate", "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
)
NSLKDD_CATEGORICAL = ("protocol_type", "service", "flag")
NSLKDD_TARGET = "label"
NSLKDD_POSITIVE = "attack"
NSLKDD_NEGATIVE = "normal"


@dataclass(frozen=True)
class Column:
    name: str
    kind: str
    values: np.ndarray

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"column {self.name!r}: unknown kind {self.kind!r}")
        dtype = np.float64 if self.kind == NUMERIC else object
        arr = np.array(self.values, dtype=dtype)
        if arr.ndim != 1:
            raise DataError(f"column {self.name!r} must be one-dimensional")
        if self.kind == NUMERIC and not np.isfinite(arr).all():
            raise DataError(f"column {self.name!r} has missing or non-finite values")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class DatasetTable:
    """Immutable table with a binary categorical target.

    ``positive_label`` names the target category treated as the positive
    class; :meth:`labels` encodes it as 1 and the other category as 0.
    """

    name: str
    columns: tuple
    target: str
    positive_label: str

    def __post_init__(self):
        cols = tuple(self.columns)
        object.__setattr__(self, "columns", cols)
        names = [c.name for c in cols]
        if len(set(names)) != len(names):
            raise DataError(f"{self.name}: duplicate column names")
        if len({len(c) for c in cols}) > 1:
            raise DataError(f"{self.name}: columns have unequal lengths")
        if self.target not in names:
            raise DataError(f"{self.name}: missing target column {self.target!r}")
        tcol = self.column(self.target)
        if tcol.kind != CATEGORICAL:
            raise DataError(f"{self.name}: target column must be categorical")
        labels = set(tcol.values.tolist())
        if len(labels) != 2:
            raise DataError(
                f"{self.name}: target not binary ({len(labels)} distinct labels)")
        if self.positive_label not in labels:
            raise DataError(
                f"{self.name}: positive label {self.positive_label!r} not in target")

    @property
    def row_count(self):
        return len(self.columns[0]) if self.columns else 0

    @property
    def column_names(self):
        return [c.name for c in self.columns]

    @property
    def kinds(self):
        return {c.name: c.kind for c in self.columns}

    @property
    def negative_label(self):
        labels = set(self.column(self.target).values.tolist())
        return next(lab for lab in labels if lab != self.positive_label)

    def column(self, name):
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def predictors(self):
        return [c for c in self.columns if c.name != self.target]

    def labels(self):
        """Target encoded as int64 with 1 for the positive label."""
        return (self.column(self.target).values == self.positive_label).astype(np.int64)

    def class_counts(self):
        y = self.labels()
        return {self.positive_label: int(y.sum()),
                self.negative_label: int(y.shape[0] - y.sum())}

    def take(self, indices, name=None):
        """New table holding the given rows in the given order."""
        idx = np.asarray(indices, dtype=np.int64)
        cols = tuple(Column(c.name, c.kind, c.values[idx]) for c in self.columns)
        return DatasetTable(name or self.name, cols, self.target, self.positive_label)

    def schema(self):
        """Predictor (name, kind) pairs; target excluded."""
        return tuple((c.name, c.kind) for c in self.predictors)


@dataclass(frozen=True)
class SplitPair:
    train: DatasetTable
    test: DatasetTable
    ratio: float
    seed: int


def _parse_float(text):
    try:
        value = float(text)
    except ValueError:
        return None
    return value


def _is_number(text):
    value = _parse_float(text)
    return value is not None and math.isfinite(value)


def table_from_rows(name, header, rows, target, positive_label, kind_overrides=None):
    """Build a table from string cells, inferring column kinds.

    A column whose every cell parses as a finite number is numeric, anything
    else is categorical.  ``kind_overrides`` maps column name to kind and wins
    over inference; the target is always categorical.
    """
    kind_overrides = dict(kind_overrides or {})
    unknown = set(kind_overrides) - set(header)
    if unknown:
        raise DataError(f"{name}: kind overrides for unknown columns {sorted(unknown)}")
    if len(set(header)) != len(header):
        raise DataError(f"{name}: duplicate column names in header")
    if target not in header:
        raise DataError(f"{name}: missing target column {target!r}")
    if not rows:
        raise DataError(f"{name}: no data rows")
    width = len(header)
    for lineno, row in enumerate(rows, start=2):
        if len(row) != width:
            raise DataError(
                f"{name}: ragged row at line {lineno} ({len(row)} fields, expected {width})")
    columns = []
    for j, col_name in enumerate(header):
        cells = [row[j] for row in rows]
        for i, cell in enumerate(cells):
            if cell == "":
                raise DataError(f"{name}: missing value in column {col_name!r} row {i + 1}")
        if col_name == target:
            kind = CATEGORICAL
        elif col_name in kind_overrides:
            kind = kind_overrides[col_name]
        else:
            kind = NUMERIC if all(_is_number(c) for c in cells) else CATEGORICAL
        if kind == NUMERIC:
            values = [_parse_float(c) for c in cells]
            if any(v is None or not math.isfinite(v) for v in values):
                raise DataError(f"{name}: column {col_name!r} is not numeric")
        else:
            values = cells
        columns.append(Column(col_name, kind, values))
    if positive_label is None:
        positive_label = rows[0][header.index(target)]
    return DatasetTable(name, tuple(columns), target, positive_label)


def load_csv(path, target, positive_label=None, kind_overrides=None, name=None):
    """Load a headed, comma-delimited UTF-8 CSV file into a DatasetTable.

    Without ``positive_label`` the first target value in the file is used.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        header = [h.strip() for h in header]
        rows = [[cell.strip() for cell in row] for row in reader if row]
    if positive_label is not None:
        positive_label = str(positive_label)
    return table_from_rows(name or path.stem, header, rows, target, positive_label,
                           kind_overrides)


def write_csv(table, path):
    """Write a table as headed CSV; floats use round-trip repr."""
    path = Path(path)
    cols = table.columns
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(table.column_names)
        cells = [[repr(float(v)) for v in c.values] if c.kind == NUMERIC
                 else [str(v) for v in c.values] for c in cols]
        writer.writerows(zip(*cells))


def load_nslkdd(path, name=None):
    """Load an NSL-KDD file (no header; 41 features, label, difficulty).

    The difficulty column is dropped and every label other than ``normal``
    becomes ``attack``, the positive class.
    """
    path = Path(path)
    expected = len(NSLKDD_FEATURES) + 2
    rows = []
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if len(row) != expected:
                raise DataError(
                    f"{path}: line {lineno} has {len(row)} fields, expected {expected}")
            label = row[41].strip().lower()
            rows.append([c.strip() for c in row[:41]]
                        + [NSLKDD_NEGATIVE if label == "normal" else NSLKDD_POSITIVE])
    if not rows:
        raise DataError(f"{path}: empty file")
    overrides = {f: (CATEGORICAL if f in NSLKDD_CATEGORICAL else NUMERIC)
                 for f in NSLKDD_FEATURES}
    header = list(NSLKDD_FEATURES) + [NSLKDD_TARGET]
    return table_from_rows(name or path.stem, header, rows, NSLKDD_TARGET,
                           NSLKDD_POSITIVE, overrides)


def stratified_split(table, ratio, seed):
    """Per-class random partition with ``round(ratio * n_class)`` training rows.

    Each class keeps at least one row on each side.  Rows stay in their
    original relative order within each partition.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    y = table.labels()
    rng = np.random.default_rng(seed)
    train_idx = []
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        if idx.shape[0] < 2:
            raise DataError(f"{table.name}: class with fewer than 2 rows")
        n_train = int(math.floor(ratio * idx.shape[0] + 0.5))
        n_train = min(max(n_train, 1), idx.shape[0] - 1)
        train_idx.append(rng.permutation(idx)[:n_train])
    train_idx = np.sort(np.concatenate(train_idx))
    mask = np.zeros(table.row_count, dtype=bool)
    mask[train_idx] = True
    test_idx = np.flatnonzero(~mask)
    return SplitPair(table.take(train_idx, f"{table.name}/train"),
                     table.take(test_idx, f"{table.name}/test"), ratio, seed)


def subset_bounds(labels, k, seed, require_both_classes=True):
    """Contiguous block boundaries for :func:`make_subsets`.

    Returns a list of ``(start, stop)`` pairs covering ``range(len(labels))``.
    """
    n = len(labels)
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > n:
        raise DataError(f"cannot cut {n} rows into {k} nonempty subsets")
    rng = np.random.default_rng(seed)
    cuts = np.sort(rng.choice(np.arange(1, n), size=k - 1, replace=False)) if k > 1 else []
    edges = [0, *(int(c) for c in cuts), n]
    bounds = list(zip(edges[:-1], edges[1:]))
    if not require_both_classes:
        return bounds
    labels = np.asarray(labels)
    merged = []
    pending = None
    for start, stop in bounds:
        if pending is not None:
            start = pending
        block = labels[start:stop]
        if block.min() == block.max():
            pending = start
            continue
        pending = None
        merged.append((start, stop))
    if pending is not None:
        if not merged:
            raise DataError("table has a single class; no valid subset exists")
        merged[-1] = (merged[-1][0], n)
    return merged


def make_subsets(table, k, seed, require_both_classes=True):
    """Cut a table into ``k`` contiguous, order-preserving blocks.

    Cut points are ``k - 1`` distinct uniform draws over the interior row
    positions.  A block holding a single class is merged into the next one
    (the last block merges backwards), so fewer than ``k`` subsets can come
    back when ``require_both_classes`` is set.
    """
    bounds = subset_bounds(table.labels(), k, seed, require_both_classes)
    if len(bounds) == 1 and bounds[0] == (0, table.row_count):
        return [table]
    return [table.take(np.arange(a, b), f"{table.name}_s{i + 1}")
            for i, (a, b) in enumerate(bounds)]
