"""Numeric block: min-max, full PCA rotation, min-max.  Categorical: one-hot.

Fitted state lives in :class:`PreprocessModel`, which serializes to a
versioned JSON document.
"""
import json
from dataclasses import dataclass

import numpy as np

from metaselect.dataset import CATEGORICAL, NUMERIC
from metaselect.errors import DataError, SchemaError

FORMAT_VERSION = 1


@dataclass(frozen=True)
class NumericMatrix:
    values: np.ndarray
    col_names: tuple

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise DataError("NumericMatrix values must be two-dimensional")
        names = tuple(self.col_names)
        if len(names) != arr.shape[1]:
            raise DataError(f"{len(names)} column names for {arr.shape[1]} columns")
        if not np.isfinite(arr).all():
            raise DataError("NumericMatrix values must be finite")
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "col_names", names)

    @property
    def rows(self):
        return self.values.shape[0]

    @property
    def cols(self):
        return self.values.shape[1]


@dataclass(frozen=True)
class PCAParams:
    means: np.ndarray
    components: np.ndarray  # rows are components, descending variance
    explained_variance: np.ndarray


@dataclass(frozen=True)
class PreprocessModel:
    schema: tuple  # predictor (name, kind) pairs the model was fitted on
    minmax1: tuple  # (min, max) per numeric column
    pca: PCAParams | None
    minmax2: tuple  # (min, max) per principal component
    onehot: tuple  # (column name, ordered categories) per categorical column

    @property
    def numeric_names(self):
        return [n for n, k in self.schema if k == NUMERIC]

    @property
    def categorical_names(self):
        return [n for n, k in self.schema if k == CATEGORICAL]

    def output_names(self):
        names = [f"pc{i + 1}" for i in range(len(self.minmax2))]
        for col, cats in self.onehot:
            names.extend(f"{col}={c}" for c in cats)
        return names


def minmax_scale(column, params=None):
    """Scale to [0, 1].

    Fitting on a constant column yields zeros.  With stored ``params`` the
    result is clamped to [0, 1].  Returns ``(scaled, (min, max))``.
    """
    x = np.asarray(column, dtype=np.float64)
    if x.size == 0:
        raise DataError("cannot scale an empty column")
    if params is None:
        lo, hi = float(x.min()), float(x.max())
        if hi == lo:
            return np.zeros_like(x), (lo, hi)
        return (x - lo) / (hi - lo), (lo, hi)
    lo, hi = params
    if hi == lo:
        return np.zeros_like(x), (lo, hi)
    return np.clip((x - lo) / (hi - lo), 0.0, 1.0), (lo, hi)


def onehot_encode(column, categories=None):
    """Indicator matrix with one column per category.

    Categories are fitted in first-occurrence order.  Values outside the
    stored categories encode as all-zero rows.  Returns
    ``(indicators, categories)``.
    """
    values = list(column)
    if not values:
        raise DataError("cannot encode an empty column")
    if categories is None:
        categories = list(dict.fromkeys(values))
    categories = list(categories)
    index = {c: i for i, c in enumerate(categories)}
    out = np.zeros((len(values), len(categories)))
    for r, v in enumerate(values):
        i = index.get(v)
        if i is not None:
            out[r, i] = 1.0
    return out, categories


def _fix_signs(components):
    # make each component's largest-magnitude loading positive
    idx = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(components.shape[0]), idx])
    signs[signs == 0] = 1.0
    return components * signs[:, None]


def pca_rotate(matrix, params=None):
    """Project onto all principal components (no truncation).

    Components come from an SVD of the centered data, ordered by descending
    explained variance; when there are fewer rows than columns the basis is
    completed with an orthonormal complement.  Returns
    ``(rotated, PCAParams)``.
    """
    X = np.asarray(getattr(matrix, "values", matrix), dtype=np.float64)
    if params is not None:
        return (X - params.means) @ params.components.T, params
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError("PCA needs at least 2 rows")
    if X.shape[1] < 1:
        raise DataError("PCA needs at least 1 column")
    n, d = X.shape
    means = X.mean(axis=0)
    Xc = X - means
    _, s, vt = np.linalg.svd(Xc, full_matrices=False)
    if vt.shape[0] < d:
        # orthonormal complement for the zero-variance directions
        q, _ = np.linalg.qr(np.vstack([vt, np.eye(d)]).T)
        vt = np.vstack([vt, q[:, vt.shape[0]:d].T])
        s = np.concatenate([s, np.zeros(d - s.shape[0])])
    components = _fix_signs(vt)
    params = PCAParams(means=means, components=components,
                       explained_variance=s ** 2 / (n - 1))
    return Xc @ components.T, params


def fit_pipeline(train):
    """Fit the preprocessing pipeline on a table's predictors."""
    schema = train.schema()
    numeric = [train.column(n).values for n, k in schema if k == NUMERIC]
    categorical = [(n, train.column(n).values) for n, k in schema if k == CATEGORICAL]

    minmax1, minmax2, pca = [], [], None
    if numeric:
        scaled = []
        for values in numeric:
            s, p = minmax_scale(values)
            scaled.append(s)
            minmax1.append(p)
        rotated, pca = pca_rotate(np.column_stack(scaled))
        for j in range(rotated.shape[1]):
            _, p = minmax_scale(rotated[:, j])
            minmax2.append(p)
    onehot = tuple((n, tuple(onehot_encode(v)[1])) for n, v in categorical)
    return PreprocessModel(schema=schema, minmax1=tuple(minmax1), pca=pca,
                           minmax2=tuple(minmax2), onehot=onehot)


def transform(model, table):
    """Apply a fitted pipeline; rotated numerics first, then indicators."""
    if table.schema() != model.schema:
        raise SchemaError(f"{table.name}: predictor schema differs from the fitted one")
    blocks = []
    if model.pca is not None:
        scaled = [minmax_scale(table.column(n).values, p)[0]
                  for n, p in zip(model.numeric_names, model.minmax1)]
        rotated, _ = pca_rotate(np.column_stack(scaled), model.pca)
        blocks.append(np.column_stack([minmax_scale(rotated[:, j], p)[0]
                                       for j, p in enumerate(model.minmax2)]))
    for name, cats in model.onehot:
        blocks.append(onehot_encode(table.column(name).values, cats)[0])
    values = np.hstack(blocks) if blocks else np.zeros((table.row_count, 0))
    return NumericMatrix(values, tuple(model.output_names()))


def _floats(arr):
    return [float(v) for v in np.asarray(arr).ravel()]


def model_to_dict(model):
    pca = None
    if model.pca is not None:
        comps = model.pca.components
        pca = {
            "means": _floats(model.pca.means),
            "shape": list(comps.shape),
            "components": _floats(comps),  # row-major
            "explained_variance": _floats(model.pca.explained_variance),
        }
    return {
        "format": "metaselect.preprocess_model",
        "version": FORMAT_VERSION,
        "schema": [list(s) for s in model.schema],
        "minmax1": [list(p) for p in model.minmax1],
        "pca": pca,
        "minmax2": [list(p) for p in model.minmax2],
        "onehot": [{"column": n, "categories": list(c)} for n, c in model.onehot],
    }


def model_from_dict(doc):
    if doc.get("format") != "metaselect.preprocess_model":
        raise ValueError("not a metaselect preprocess-model document")
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported preprocess-model version {doc.get('version')}")
    pca = None
    if doc["pca"] is not None:
        p = doc["pca"]
        pca = PCAParams(
            means=np.asarray(p["means"], dtype=np.float64),
            components=np.asarray(p["components"], dtype=np.float64).reshape(p["shape"]),
            explained_variance=np.asarray(p["explained_variance"], dtype=np.float64))
    return PreprocessModel(
        schema=tuple(tuple(s) for s in doc["schema"]),
        minmax1=tuple(tuple(p) for p in doc["minmax1"]),
        pca=pca,
        minmax2=tuple(tuple(p) for p in doc["minmax2"]),
        onehot=tuple((o["column"], tuple(o["categories"])) for o in doc["onehot"]),
    )


def dumps(model):
    # repr of a float is the shortest string that round-trips (<= 17 digits)
    return json.dumps(model_to_dict(model), indent=2)


def loads(text):
    return model_from_dict(json.loads(text))
