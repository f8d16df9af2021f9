"""Algorithm selection framework for binary cyber attack detection.

Characterize a problem, filter a technique taxonomy to candidates, rank them
with a rules-of-thumb tree and a meta-learner, and score both strategies
against observed base-learner recall.
"""
__version__ = "0.1.0"

from metaselect.dataset import (  # noqa: E402
    DatasetTable, load_csv, load_nslkdd, make_subsets, stratified_split)
from metaselect.metafeatures import MetaFeatureVector, extract  # noqa: E402

__all__ = [
    "DatasetTable", "MetaFeatureVector", "extract", "load_csv", "load_nslkdd",
    "make_subsets", "stratified_split", "__version__",
]
