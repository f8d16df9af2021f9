# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled hot kernels: Gini tree growth, tree traversal and RBF SMO.

Operation order matches ``_pure.py`` so both backends agree.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, INFINITY
from libc.stdint cimport uint64_t, int64_t
from libcpp.algorithm cimport sort as stdsort
from libcpp.pair cimport pair
from libcpp.vector cimport vector
from scipy.linalg.cython_blas cimport dgemv

cnp.import_array()

cdef double FEATURE_THRESHOLD = 1e-7
cdef double TAU = 1e-12


cdef inline uint64_t splitmix_next(uint64_t* state) noexcept nogil:
    state[0] += <uint64_t>0x9E3779B97F4A7C15
    cdef uint64_t z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef struct StackRecord:
    int64_t start
    int64_t end
    int64_t depth
    int64_t parent
    bint is_left


def build_tree(X, y, samples, int64_t max_features, int64_t min_samples_split,
               int64_t max_depth, seed):
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef int64_t[::1] work = np.array(samples, dtype=np.int64, copy=True)
    cdef int64_t n_total = work.shape[0]
    cdef int64_t d = Xv.shape[1]
    cdef int64_t[::1] features = np.arange(d, dtype=np.int64)
    cdef int64_t[::1] scratch = np.empty(max(n_total, 1), dtype=np.int64)
    cdef uint64_t state = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)

    cdef vector[int64_t] feature, left, right, counts
    cdef vector[double] threshold, value
    cdef vector[StackRecord] stack
    cdef vector[pair[double, int64_t]] buf
    buf.resize(max(n_total, 1))

    cdef StackRecord rec, child
    cdef int64_t start, end, depth, parent, node, n, k, j, t, f, tmp
    cdef int64_t visited, best_f, n_left, c, nl_count
    cdef double pos, best_proxy, best_thr, proxy, pos_l, pos_r, n_l, n_r
    cdef double total_pos, thr, v0, v1
    cdef bint found

    rec.start = 0
    rec.end = n_total
    rec.depth = 0
    rec.parent = -1
    rec.is_left = False
    stack.push_back(rec)

    with nogil:
        while stack.size() > 0:
            rec = stack.back()
            stack.pop_back()
            start = rec.start
            end = rec.end
            depth = rec.depth
            parent = rec.parent
            node = feature.size()
            feature.push_back(-1)
            threshold.push_back(0.0)
            left.push_back(-1)
            right.push_back(-1)
            n = end - start
            pos = 0.0
            for k in range(start, end):
                pos = pos + yv[work[k]]
            value.push_back(pos / n)
            counts.push_back(n)
            if parent >= 0:
                if rec.is_left:
                    left[parent] = node
                else:
                    right[parent] = node

            if (n < min_samples_split or pos == 0.0 or pos == n
                    or (max_depth >= 0 and depth >= max_depth)):
                continue

            # split search
            for k in range(d):
                features[k] = k
            best_proxy = INFINITY
            found = False
            best_f = -1
            best_thr = 0.0
            visited = 0
            for k in range(d):
                if visited >= max_features:
                    break
                j = k + <int64_t>(splitmix_next(&state) % <uint64_t>(d - k))
                tmp = features[k]
                features[k] = features[j]
                features[j] = tmp
                f = features[k]
                for t in range(n):
                    buf[t].first = Xv[work[start + t], f]
                    buf[t].second = t
                stdsort(buf.begin(), buf.begin() + n)
                if buf[n - 1].first <= buf[0].first + FEATURE_THRESHOLD:
                    continue
                visited += 1
                total_pos = pos
                pos_l = 0.0
                for t in range(n - 1):
                    pos_l = pos_l + yv[work[start + buf[t].second]]
                    v0 = buf[t].first
                    v1 = buf[t + 1].first
                    if not (v1 > v0 + FEATURE_THRESHOLD):
                        continue
                    n_l = <double>(t + 1)
                    n_r = n - n_l
                    pos_r = total_pos - pos_l
                    proxy = (pos_l * (n_l - pos_l) / n_l
                             + pos_r * (n_r - pos_r) / n_r)
                    if proxy < best_proxy:
                        best_proxy = proxy
                        thr = (v0 + v1) / 2.0
                        if thr == v1 or thr == INFINITY or thr == -INFINITY:
                            thr = v0
                        best_thr = thr
                        best_f = f
                        found = True
            if not found:
                continue

            # stable partition of work[start:end]
            nl_count = 0
            for t in range(start, end):
                if Xv[work[t], best_f] <= best_thr:
                    scratch[nl_count] = work[t]
                    nl_count += 1
            c = nl_count
            for t in range(start, end):
                if not (Xv[work[t], best_f] <= best_thr):
                    scratch[c] = work[t]
                    c += 1
            for t in range(n):
                work[start + t] = scratch[t]
            feature[node] = best_f
            threshold[node] = best_thr

            child.start = start + nl_count
            child.end = end
            child.depth = depth + 1
            child.parent = node
            child.is_left = False
            stack.push_back(child)
            child.start = start
            child.end = start + nl_count
            child.is_left = True
            stack.push_back(child)

    m = feature.size()
    out_f = np.empty(m, dtype=np.int64)
    out_t = np.empty(m, dtype=np.float64)
    out_l = np.empty(m, dtype=np.int64)
    out_r = np.empty(m, dtype=np.int64)
    out_v = np.empty(m, dtype=np.float64)
    out_c = np.empty(m, dtype=np.int64)
    cdef int64_t[::1] of = out_f, ol = out_l, orr = out_r, oc = out_c
    cdef double[::1] ot = out_t, ov = out_v
    for k in range(<int64_t>m):
        of[k] = feature[k]
        ot[k] = threshold[k]
        ol[k] = left[k]
        orr[k] = right[k]
        ov[k] = value[k]
        oc[k] = counts[k]
    return out_f, out_t, out_l, out_r, out_v, out_c


def tree_apply(feature, threshold, left, right, X):
    cdef int64_t[::1] fv = np.ascontiguousarray(feature, dtype=np.int64)
    cdef double[::1] tv = np.ascontiguousarray(threshold, dtype=np.float64)
    cdef int64_t[::1] lv = np.ascontiguousarray(left, dtype=np.int64)
    cdef int64_t[::1] rv = np.ascontiguousarray(right, dtype=np.int64)
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    out = np.zeros(Xv.shape[0], dtype=np.int64)
    cdef int64_t[::1] ov = out
    cdef int64_t i, node
    with nogil:
        for i in range(Xv.shape[0]):
            node = 0
            while fv[node] >= 0:
                if Xv[i, fv[node]] <= tv[node]:
                    node = lv[node]
                else:
                    node = rv[node]
            ov[i] = node
    return out


cdef class _RowCache:
    """LRU cache of RBF kernel rows indexed by sample."""
    cdef double[:, ::1] X
    cdef double[::1] sqnorm
    cdef double gamma
    cdef int64_t n, slots, clock
    cdef double[:, ::1] rows
    cdef int64_t[::1] slot_of, sample_of, last_used
    cdef double[::1] dots

    def __init__(self, double[:, ::1] X, double[::1] sqnorm, double gamma,
                 double cache_mb):
        self.X = X
        self.sqnorm = sqnorm
        self.gamma = gamma
        self.n = X.shape[0]
        self.slots = <int64_t>(cache_mb * 1024.0 * 1024.0 / (8.0 * max(self.n, 1)))
        if self.slots < 2:
            self.slots = 2
        if self.slots > self.n:
            self.slots = max(self.n, 2)
        self.rows = np.empty((self.slots, self.n), dtype=np.float64)
        self.slot_of = np.full(self.n, -1, dtype=np.int64)
        self.sample_of = np.full(self.slots, -1, dtype=np.int64)
        self.last_used = np.zeros(self.slots, dtype=np.int64)
        self.dots = np.empty(self.n, dtype=np.float64)
        self.clock = 0

    cdef double* get(self, int64_t s) noexcept nogil:
        cdef int64_t slot = self.slot_of[s]
        cdef int64_t k, victim
        cdef int m, nn, inc = 1
        cdef double one = 1.0, zero = 0.0, dist, sq_s
        cdef char trans = b'T'
        self.clock += 1
        if slot >= 0:
            self.last_used[slot] = self.clock
            return &self.rows[slot, 0]
        victim = 0
        for k in range(1, self.slots):
            if self.last_used[k] < self.last_used[victim]:
                victim = k
        if self.sample_of[victim] >= 0:
            self.slot_of[self.sample_of[victim]] = -1
        self.sample_of[victim] = s
        self.slot_of[s] = victim
        self.last_used[victim] = self.clock
        m = <int>self.X.shape[1]
        nn = <int>self.n
        # dots = X @ X[s]; X is row-major so it is X^T in column-major terms
        dgemv(&trans, &m, &nn, &one, &self.X[0, 0], &m, &self.X[s, 0], &inc,
              &zero, &self.dots[0], &inc)
        sq_s = self.sqnorm[s]
        for k in range(self.n):
            dist = self.sqnorm[k] + sq_s - 2.0 * self.dots[k]
            if dist < 0.0:
                dist = 0.0
            self.rows[victim, k] = exp(-self.gamma * dist)
        return &self.rows[victim, 0]


def rbf_solve(X, sample_of_var, y, p, double C, double gamma, double eps,
              int64_t max_iter, double cache_mb):
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[::1] sq = np.einsum("ij,ij->i", Xv, Xv)
    cdef int64_t[::1] s_of = np.ascontiguousarray(sample_of_var, dtype=np.int64)
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    G_arr = np.array(p, dtype=np.float64, copy=True)
    alpha_arr = np.zeros(s_of.shape[0], dtype=np.float64)
    cdef double[::1] G = G_arr
    cdef double[::1] alpha = alpha_arr
    cdef _RowCache cache = _RowCache(Xv, sq, gamma, cache_mb)
    cdef int64_t n_var = s_of.shape[0]
    cdef int64_t it = 0, t, i, j
    cdef double gmax, gmax2, v, grad_diff, quad, obj, obj_min
    cdef double yi, yj, kij, ai, aj, old_i, old_j, delta, diff, total, di, dj
    cdef double* k_i
    cdef double* k_j
    cdef double[::1] k_i_copy = np.empty(max(Xv.shape[0], 1), dtype=np.float64)

    with nogil:
        while it < max_iter:
            gmax = -INFINITY
            i = -1
            for t in range(n_var):
                if yv[t] > 0:
                    if alpha[t] < C:
                        v = -G[t]
                        if v > gmax:
                            gmax = v
                            i = t
                else:
                    if alpha[t] > 0:
                        v = G[t]
                        if v > gmax:
                            gmax = v
                            i = t
            if i < 0:
                break
            gmax2 = -INFINITY
            for t in range(n_var):
                if yv[t] > 0:
                    if alpha[t] > 0 and G[t] > gmax2:
                        gmax2 = G[t]
                else:
                    if alpha[t] < C and -G[t] > gmax2:
                        gmax2 = -G[t]
            if gmax2 == -INFINITY or gmax + gmax2 < eps:
                break
            k_i = cache.get(s_of[i])
            # k_j fetch may evict k_i's slot when the cache is tiny
            for t in range(Xv.shape[0]):
                k_i_copy[t] = k_i[t]
            j = -1
            obj_min = INFINITY
            for t in range(n_var):
                if yv[t] > 0:
                    if not (alpha[t] > 0):
                        continue
                    grad_diff = gmax + G[t]
                else:
                    if not (alpha[t] < C):
                        continue
                    grad_diff = gmax - G[t]
                if grad_diff > 0:
                    quad = 2.0 - 2.0 * k_i_copy[s_of[t]]
                    if not (quad > 0):
                        quad = TAU
                    obj = -(grad_diff * grad_diff) / quad
                    if obj < obj_min:
                        obj_min = obj
                        j = t
            if j < 0:
                break
            k_j = cache.get(s_of[j])

            yi = yv[i]
            yj = yv[j]
            kij = k_i_copy[s_of[j]]
            old_i = alpha[i]
            old_j = alpha[j]
            ai = old_i
            aj = old_j
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
            alpha[i] = ai
            alpha[j] = aj
            di = ai - old_i
            dj = aj - old_j
            for t in range(n_var):
                G[t] += yv[t] * (yi * di * k_i_copy[s_of[t]] + yj * dj * k_j[s_of[t]])
            it += 1

    from metaselect.kernels._pure import _rho
    return alpha_arr, _rho(alpha_arr, np.asarray(yv), G_arr, C), it
