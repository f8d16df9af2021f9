"""Pure-Python/numpy implementations of the hot kernels.

Each function here mirrors one in ``_fast.pyx`` operation for operation, so
that both backends produce the same trees and the same dual solutions.  This
module is the reference; it is also what runs when the compiled extension is
unavailable.
"""
import math

import numpy as np

MASK64 = (1 << 64) - 1

# Two sorted values closer than this are not split between.
FEATURE_THRESHOLD = 1e-7
# Curvature floor for non positive-definite pairs in SMO.
TAU = 1e-12


class SplitMix64:
    """64-bit splitmix generator; integer-exact twin of the C version."""

    def __init__(self, seed):
        self.state = int(seed) & MASK64

    def next(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)


def _best_split(X, y, samples, features, max_features, rng):
    """Search a node for the Gini-optimal split.

    Returns ``(feature, threshold, n_left)`` with ``samples`` reordered so the
    left child occupies the first ``n_left`` entries, or ``None`` when every
    feature is constant within the node.
    """
    n = samples.shape[0]
    d = features.shape[0]
    features[:] = np.arange(d)
    best_proxy = math.inf
    best = None
    visited = 0
    for k in range(d):
        if visited >= max_features:
            break
        j = k + rng.next() % (d - k)
        features[k], features[j] = features[j], features[k]
        f = features[k]
        values = X[samples, f]
        order = np.argsort(values, kind="stable")
        sv = values[order]
        if sv[-1] <= sv[0] + FEATURE_THRESHOLD:
            continue
        visited += 1
        ys = y[samples[order]]
        pos_left = np.cumsum(ys)[:-1]
        n_left = np.arange(1, n, dtype=np.float64)
        n_right = n - n_left
        pos_right = pos_left[-1] + ys[-1] - pos_left
        proxy = (pos_left * (n_left - pos_left) / n_left
                 + pos_right * (n_right - pos_right) / n_right)
        valid = sv[1:] > sv[:-1] + FEATURE_THRESHOLD
        if not valid.any():
            continue
        cand = np.flatnonzero(valid)
        c = cand[np.argmin(proxy[cand])]
        if proxy[c] < best_proxy:
            best_proxy = proxy[c]
            threshold = (sv[c] + sv[c + 1]) / 2.0
            if threshold == sv[c + 1] or math.isinf(threshold):
                threshold = sv[c]
            best = (int(f), float(threshold))
    if best is None:
        return None
    f, threshold = best
    go_left = X[samples, f] <= threshold
    left = samples[go_left]
    right = samples[~go_left]
    samples[: left.shape[0]] = left
    samples[left.shape[0]:] = right
    return f, threshold, left.shape[0]


def build_tree(X, y, samples, max_features, min_samples_split, max_depth, seed):
    """Grow a binary Gini tree depth-first.

    ``samples`` may contain repeated indices (bootstrap draws).  ``max_depth``
    of -1 means unlimited.  Returns ``(feature, threshold, left, right, value,
    n_node_samples)``; leaves carry ``feature == -1`` and ``value`` is the
    positive-class fraction of the node.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    work = np.array(samples, dtype=np.int64, copy=True)
    d = X.shape[1]
    features = np.arange(d, dtype=np.int64)
    rng = SplitMix64(seed)

    feature, threshold, left, right, value, counts = [], [], [], [], [], []
    # (start, end, depth, parent, is_left)
    stack = [(0, work.shape[0], 0, -1, False)]
    while stack:
        start, end, depth, parent, is_left = stack.pop()
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        n = end - start
        pos = float(y[work[start:end]].sum())
        value.append(pos / n)
        counts.append(n)
        if parent >= 0:
            if is_left:
                left[parent] = node
            else:
                right[parent] = node

        if (n < min_samples_split or pos == 0.0 or pos == n
                or (max_depth >= 0 and depth >= max_depth)):
            continue
        node_samples = work[start:end]
        split = _best_split(X, y, node_samples, features, max_features, rng)
        if split is None:
            continue
        f, thr, n_left = split
        work[start:end] = node_samples
        feature[node] = f
        threshold[node] = thr
        stack.append((start + n_left, end, depth + 1, node, False))
        stack.append((start, start + n_left, depth + 1, node, True))

    return (np.array(feature, dtype=np.int64),
            np.array(threshold, dtype=np.float64),
            np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64),
            np.array(value, dtype=np.float64),
            np.array(counts, dtype=np.int64))


def tree_apply(feature, threshold, left, right, X):
    """Leaf index reached by every row of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    node = np.zeros(X.shape[0], dtype=np.int64)
    active = np.flatnonzero(feature[node] >= 0)
    while active.size:
        cur = node[active]
        go_left = X[active, feature[cur]] <= threshold[cur]
        node[active] = np.where(go_left, left[cur], right[cur])
        active = active[feature[node[active]] >= 0]
    return node


def _kernel_row(X, sqnorm, gamma, s):
    dist = sqnorm + sqnorm[s] - 2.0 * (X @ X[s])
    np.maximum(dist, 0.0, out=dist)
    return np.exp(-gamma * dist)


def rbf_solve(X, sample_of_var, y, p, C, gamma, eps, max_iter, cache_mb):
    """SMO for ``min 0.5 a'Qa + p'a`` s.t. ``y'a = 0``, ``0 <= a <= C``.

    ``Q[t, u] = y[t] y[u] K(x[s(t)], x[s(u)])`` with an RBF kernel, where
    ``s = sample_of_var`` lets one sample back two variables (epsilon-SVR).
    Working-set selection uses second-order information.  Returns
    ``(alpha, rho, n_iter)``; ``n_iter == max_iter`` signals non-convergence.
    ``cache_mb`` is accepted for signature parity and ignored here.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    s_of = np.asarray(sample_of_var, dtype=np.int64)
    y = np.asarray(y, dtype=np.float64)
    G = np.array(p, dtype=np.float64, copy=True)
    n_var = s_of.shape[0]
    alpha = np.zeros(n_var)
    sqnorm = np.einsum("ij,ij->i", X, X)
    cache = {}

    def krow(s):
        row = cache.get(s)
        if row is None:
            row = _kernel_row(X, sqnorm, gamma, s)[s_of]
            if len(cache) > 256:
                cache.pop(next(iter(cache)))
            cache[s] = row
        return row

    it = 0
    while it < max_iter:
        pos = y > 0
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        if not up.any() or not low.any():
            break
        minus_yg = -y * G
        cand_i = np.flatnonzero(up)
        i = int(cand_i[np.argmax(minus_yg[cand_i])])
        gmax = minus_yg[i]
        cand_low = np.flatnonzero(low)
        gmax2 = float(np.max(-minus_yg[cand_low]))
        if gmax + gmax2 < eps:
            break
        k_i = krow(int(s_of[i]))
        grad_diff = gmax - minus_yg[cand_low]
        ok = grad_diff > 0
        if not ok.any():
            break
        cand_j = cand_low[ok]
        quad = 2.0 - 2.0 * k_i[cand_j]
        quad = np.where(quad > 0, quad, TAU)
        obj = -(grad_diff[ok] ** 2) / quad
        j = int(cand_j[np.argmin(obj)])
        k_j = krow(int(s_of[j]))

        yi, yj = y[i], y[j]
        kij = k_i[j]
        old_i, old_j = alpha[i], alpha[j]
        ai, aj = old_i, old_j
        if yi != yj:
            quad = 2.0 + 2.0 * (yi * yj * kij)
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0:
                if aj < 0:
                    aj = 0.0
                    ai = diff
            else:
                if ai < 0:
                    ai = 0.0
                    aj = -diff
            if diff > 0:
                if ai > C:
                    ai = C
                    aj = C - diff
            else:
                if aj > C:
                    aj = C
                    ai = C + diff
        else:
            quad = 2.0 - 2.0 * (yi * yj * kij)
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ai -= delta
            aj += delta
            if total > C:
                if ai > C:
                    ai = C
                    aj = total - C
            else:
                if aj < 0:
                    aj = 0.0
                    ai = total
            if total > C:
                if aj > C:
                    aj = C
                    ai = total - C
            else:
                if ai < 0:
                    ai = 0.0
                    aj = total
        alpha[i], alpha[j] = ai, aj
        di = ai - old_i
        dj = aj - old_j
        G += y * (yi * di * k_i + yj * dj * k_j)
        it += 1

    return alpha, _rho(alpha, y, G, C), it


def _rho(alpha, y, G, C):
    yg = y * G
    at_upper = alpha >= C
    at_lower = alpha <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        return float(yg[free].sum() / free.sum())
    ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
    ub = yg[ub_mask].min() if ub_mask.any() else math.inf
    lb = yg[lb_mask].max() if lb_mask.any() else -math.inf
    return float((ub + lb) / 2.0)
