"""The 12-element dataset description fed to the meta-learner."""
import json
import statistics
from dataclasses import astuple, dataclass, fields

import numpy as np

from metaselect.dataset import CATEGORICAL, NUMERIC
from metaselect.errors import DataError


@dataclass(frozen=True)
class MetaFeatureVector:
    n_rows: int
    n_cols: int
    rows_to_cols: float
    n_discrete: int
    max_factors: int
    min_factors: int
    avg_factors: float
    n_continuous: int
    grad_avg: float
    grad_min: float
    grad_max: float
    grad_std: float

    @classmethod
    def names(cls):
        return [f.name for f in fields(cls)]

    def as_array(self):
        return np.array(astuple(self), dtype=np.float64)

    def to_dict(self):
        return dict(zip(self.names(), astuple(self)))

    @classmethod
    def from_dict(cls, doc):
        missing = set(cls.names()) - set(doc)
        if missing:
            raise ValueError(f"meta-feature record lacks {sorted(missing)}")
        return cls(**{n: doc[n] for n in cls.names()})

    def to_json(self):
        return json.dumps(self.to_dict())


def column_gradient(column):
    """Mean absolute step between consecutive rows of the min-max scaled column."""
    x = np.asarray(column, dtype=np.float64)
    if x.shape[0] < 2:
        raise DataError("gradient needs at least 2 values")
    lo, hi = x.min(), x.max()
    if hi == lo:
        return 0.0
    scaled = (x - lo) / (hi - lo)
    return float(np.mean(np.abs(np.diff(scaled))))


def extract(table):
    """Compute the meta-feature vector of a table's predictors (rows in stored order)."""
    predictors = table.predictors
    if not predictors:
        raise DataError(f"{table.name}: no predictor columns")
    n_rows = table.row_count
    if n_rows < 2:
        raise DataError(f"{table.name}: need at least 2 rows")
    discrete = [c for c in predictors if c.kind == CATEGORICAL]
    continuous = [c for c in predictors if c.kind == NUMERIC]

    factors = [len(set(c.values.tolist())) for c in discrete]
    if factors:
        max_f, min_f, avg_f = max(factors), min(factors), statistics.fmean(factors)
    else:
        max_f = min_f = 0
        avg_f = 0.0

    # exactly rounded sums keep the result independent of column order
    grads = [column_gradient(c.values) for c in continuous]
    if grads:
        g_min, g_max = min(grads), max(grads)
        g_avg = min(max(statistics.fmean(grads), g_min), g_max)
        g_std = statistics.pstdev(grads)
    else:
        g_avg = g_min = g_max = g_std = 0.0

    n_cols = len(predictors)
    return MetaFeatureVector(
        n_rows=n_rows, n_cols=n_cols, rows_to_cols=n_rows / n_cols,
        n_discrete=len(discrete), max_factors=max_f, min_factors=min_f,
        avg_factors=avg_f, n_continuous=len(continuous),
        grad_avg=g_avg, grad_min=g_min, grad_max=g_max, grad_std=g_std)
