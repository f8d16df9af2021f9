"""RBF kernel machines solved by SMO: a max-margin classifier and epsilon-SVR."""
import logging

import numpy as np

from metaselect import kernels

logger = logging.getLogger(__name__)

_CHUNK = 2048


def scale_gamma(X):
    """Kernel coefficient ``1 / (n_features * Var(X))``; 1.0 for zero variance."""
    X = np.asarray(X, dtype=np.float64)
    var = X.var()
    if X.shape[1] == 0 or var == 0.0:
        return 1.0
    return 1.0 / (X.shape[1] * var)


def rbf_kernel(A, B, gamma):
    sq_a = np.einsum("ij,ij->i", A, A)
    sq_b = np.einsum("ij,ij->i", B, B)
    dist = sq_a[:, None] + sq_b[None, :] - 2.0 * (A @ B.T)
    np.maximum(dist, 0.0, out=dist)
    return np.exp(-gamma * dist)


def _max_iter(n_var):
    return max(10_000_000, 100 * n_var)


class _KernelMachine:
    def __init__(self, C=1.0, gamma="scale", tol=1e-3, cache_mb=200.0):
        self.C = float(C)
        self.gamma = gamma
        self.tol = float(tol)
        self.cache_mb = float(cache_mb)

    def _resolve_gamma(self, X):
        if self.gamma == "scale":
            return scale_gamma(X)
        return float(self.gamma)

    def _store(self, X, coef, rho, gamma):
        keep = coef != 0.0
        self.support_vectors_ = np.ascontiguousarray(X[keep])
        self.dual_coef_ = coef[keep]
        self.rho_ = float(rho)
        self.gamma_ = float(gamma)

    def decision_function(self, X):
        X = np.asarray(X, dtype=np.float64)
        out = np.empty(X.shape[0])
        if self.support_vectors_.shape[0] == 0:
            out.fill(-self.rho_)
            return out
        for lo in range(0, X.shape[0], _CHUNK):
            K = rbf_kernel(X[lo:lo + _CHUNK], self.support_vectors_, self.gamma_)
            out[lo:lo + _CHUNK] = K @ self.dual_coef_ - self.rho_
        return out

    def get_state(self):
        return {
            "C": self.C, "tol": self.tol, "gamma": self.gamma_, "rho": self.rho_,
            "n_features": int(self.support_vectors_.shape[1]),
            "support_vectors": self.support_vectors_.tolist(),
            "dual_coef": self.dual_coef_.tolist(),
        }

    @classmethod
    def from_state(cls, state, **kwargs):
        m = cls(C=state["C"], gamma=state["gamma"], tol=state["tol"], **kwargs)
        m.support_vectors_ = np.asarray(state["support_vectors"], dtype=np.float64)
        m.support_vectors_ = m.support_vectors_.reshape(len(state["dual_coef"]),
                                                        state["n_features"])
        m.dual_coef_ = np.asarray(state["dual_coef"], dtype=np.float64)
        m.rho_ = float(state["rho"])
        m.gamma_ = float(state["gamma"])
        return m


class KernelSVC(_KernelMachine):
    """Soft-margin RBF classifier; positive class is label 1."""

    def fit(self, X, y):
        X = np.ascontiguousarray(X, dtype=np.float64)
        signs = np.where(np.asarray(y) == 1, 1.0, -1.0)
        n = X.shape[0]
        gamma = self._resolve_gamma(X)
        max_iter = _max_iter(n)
        alpha, rho, n_iter = kernels.rbf_solve(
            X, np.arange(n), signs, -np.ones(n), self.C, gamma, self.tol,
            max_iter, self.cache_mb)
        if n_iter >= max_iter:
            logger.warning("SMO reached %d iterations without converging", n_iter)
        self.n_iter_ = n_iter
        self._store(X, alpha * signs, rho, gamma)
        return self

    def predict(self, X):
        # ties go to the negative class
        return (self.decision_function(X) > 0.0).astype(np.int64)


class KernelSVR(_KernelMachine):
    """Epsilon-insensitive RBF regression.

    Used as a classifier by regressing the 0/1 label and thresholding the raw
    output at ``threshold``.
    """

    def __init__(self, C=1.0, gamma="scale", epsilon=0.1, tol=1e-3,
                 threshold=0.5, cache_mb=200.0):
        super().__init__(C=C, gamma=gamma, tol=tol, cache_mb=cache_mb)
        self.epsilon = float(epsilon)
        self.threshold = float(threshold)

    def fit(self, X, z):
        X = np.ascontiguousarray(X, dtype=np.float64)
        z = np.asarray(z, dtype=np.float64)
        n = X.shape[0]
        gamma = self._resolve_gamma(X)
        sample_of = np.concatenate([np.arange(n), np.arange(n)])
        signs = np.concatenate([np.ones(n), -np.ones(n)])
        p = np.concatenate([self.epsilon - z, self.epsilon + z])
        max_iter = _max_iter(2 * n)
        alpha, rho, n_iter = kernels.rbf_solve(
            X, sample_of, signs, p, self.C, gamma, self.tol, max_iter,
            self.cache_mb)
        if n_iter >= max_iter:
            logger.warning("SMO reached %d iterations without converging", n_iter)
        self.n_iter_ = n_iter
        self._store(X, alpha[:n] - alpha[n:], rho, gamma)
        return self

    def predict_raw(self, X):
        return self.decision_function(X)

    def predict(self, X):
        return (self.predict_raw(X) > self.threshold).astype(np.int64)

    def get_state(self):
        state = super().get_state()
        state.update(epsilon=self.epsilon, threshold=self.threshold)
        return state

    @classmethod
    def from_state(cls, state):
        return super().from_state(state, epsilon=state["epsilon"],
                                  threshold=state["threshold"])
