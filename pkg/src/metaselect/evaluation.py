"""Recall, recall efficiency, Spearman rank correlation, Bonferroni intervals."""
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import stats

from metaselect.errors import MetaselectError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise MetaselectError("confusion counts must be non-negative")

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    @classmethod
    def from_labels(cls, y_true, y_pred):
        y_true = np.asarray(y_true).astype(bool)
        y_pred = np.asarray(y_pred).astype(bool)
        if y_true.shape != y_pred.shape:
            raise MetaselectError("label arrays differ in length")
        return cls(tp=int(np.sum(y_true & y_pred)), fp=int(np.sum(~y_true & y_pred)),
                   tn=int(np.sum(~y_true & ~y_pred)), fn=int(np.sum(y_true & ~y_pred)))


@dataclass(frozen=True)
class RecallSample:
    algorithm_id: str
    recalls: tuple

    @property
    def n(self):
        return len(self.recalls)

    @property
    def mean(self):
        return float(np.mean(self.recalls))

    @property
    def sd(self):
        # sample SD; a single observation has no spread
        return float(np.std(self.recalls, ddof=1)) if self.n > 1 else 0.0


@dataclass(frozen=True)
class Interval:
    mean: float
    half_width: float
    alpha: float
    n: int

    @property
    def lower(self):
        return self.mean - self.half_width

    @property
    def upper(self):
        return self.mean + self.half_width

    def overlaps(self, other):
        return self.lower <= other.upper and other.lower <= self.upper


def recall(counts):
    """TP / (TP + FN) with the attack class positive."""
    positives = counts.tp + counts.fn
    if positives == 0:
        raise MetaselectError("recall undefined without positive examples")
    return counts.tp / positives


def recall_efficiency(top_recommended_recall, best_observed_recall):
    """Observed recall of the top recommendation over the best observed recall."""
    if best_observed_recall <= 0:
        raise MetaselectError("best observed recall must be positive")
    return top_recommended_recall / best_observed_recall


def _check_permutation(ranks):
    r = list(ranks)
    if sorted(r) != list(range(1, len(r) + 1)):
        raise MetaselectError(f"{r} is not a permutation of 1..{len(r)}")
    return r


def spearman(ranks_a, ranks_b):
    """Rank correlation of two tie-free rankings: 1 - 6 sum(d^2) / (n (n^2 - 1))."""
    a = _check_permutation(ranks_a)
    b = _check_permutation(ranks_b)
    if len(a) != len(b):
        raise MetaselectError("rankings differ in length")
    n = len(a)
    if n < 2:
        raise MetaselectError("need at least 2 ranked items")
    d2 = sum((x - y) ** 2 for x, y in zip(a, b))
    denom = n * (n * n - 1)
    # single rounding of an exact integer ratio, so -36/120 gives -0.3 exactly
    return (denom - 6 * d2) / denom


@lru_cache(maxsize=None)
def _null_d2_counts(n):
    counts = {}
    base = range(1, n + 1)
    for perm in itertools.permutations(base):
        d2 = sum((i - p) ** 2 for i, p in zip(base, perm))
        counts[d2] = counts.get(d2, 0) + 1
    return counts


EXACT_MAX_N = 8


def spearman_pvalue(rho, n):
    """Two-sided p-value of a tie-free Spearman coefficient.

    Exact permutation distribution for ``n <= 8``; Student-t approximation
    above that.
    """
    if n < 2:
        raise MetaselectError("need at least 2 ranked items")
    if n <= EXACT_MAX_N:
        counts = _null_d2_counts(n)
        total = math.factorial(n)
        denom = n * (n * n - 1)
        hits = sum(c for d2, c in counts.items()
                   if abs((denom - 6 * d2) / denom) >= abs(rho) - 1e-12)
        return hits / total
    if abs(rho) >= 1.0:
        return 0.0
    t = rho * math.sqrt((n - 2) / (1 - rho * rho))
    return float(2 * stats.t.sf(abs(t), n - 2))


def spearman_critical_value(n, alpha=0.10):
    """Smallest |rho| that is significant at two-sided level ``alpha``."""
    if n <= EXACT_MAX_N:
        denom = n * (n * n - 1)
        candidates = sorted({abs((denom - 6 * d2) / denom) for d2 in _null_d2_counts(n)})
        for c in candidates:
            if spearman_pvalue(c, n) <= alpha:
                return c
        return math.inf
    t = stats.t.ppf(1 - alpha / 2, n - 2)
    return float(t / math.sqrt(n - 2 + t * t))


def bonferroni_ci(samples, family_confidence=0.90):
    """Simultaneous t intervals for each algorithm's mean recall.

    ``samples`` maps algorithm id to a sequence of per-repetition recalls.
    Each of the ``m`` intervals uses level ``1 - (1 - family_confidence) / m``.
    """
    if not samples:
        raise MetaselectError("no samples given")
    if not 0.0 < family_confidence < 1.0:
        raise MetaselectError("family confidence must lie in (0, 1)")
    m = len(samples)
    alpha = (1.0 - family_confidence) / m
    out = {}
    for alg, values in samples.items():
        x = np.asarray(values, dtype=np.float64)
        n = x.shape[0]
        if n < 2:
            raise MetaselectError(f"{alg}: interval needs at least 2 observations")
        sd = float(np.std(x, ddof=1))
        t = float(stats.t.ppf(1.0 - alpha / 2.0, n - 1))
        out[alg] = Interval(mean=float(x.mean()), half_width=t * sd / math.sqrt(n),
                            alpha=alpha, n=n)
    return out


def overlapping_pairs(intervals):
    ids = sorted(intervals)
    return [(a, b) for a, b in itertools.combinations(ids, 2)
            if intervals[a].overlaps(intervals[b])]
