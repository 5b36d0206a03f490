"""Predictor standardization, principal components, and the implicit
static-form design operator for time-varying coefficient regressions.

A regression y_t = x_t beta_t + e_t with T observations and p regressors can
be rewritten as a single static regression y = X beta + e whose design matrix
has (T+1)p columns: the first p columns repeat x_t in every row (constant
coefficient part) and each row t additionally carries x_t in its own block of
p "time dummy" columns.  The matrix is never materialized; all products are
computed in O(Tp).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PcaModel:
    """Frozen standardization and loading matrix from a PCA fit."""

    means: np.ndarray
    scales: np.ndarray
    loadings: np.ndarray  # p x K, columns orthonormal
    explained: np.ndarray  # K eigenvalues, descending


def fit_pca(X, n_components: int) -> PcaModel:
    """Fit principal components on the correlation matrix of the columns of X.

    Columns are standardized to zero mean and unit (sample) variance, the
    correlation matrix is eigendecomposed, and the top ``n_components``
    eigenvectors are returned with a fixed sign convention: the entry of
    largest magnitude in each loading column is made positive.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be 2-dimensional")
    n, p = X.shape
    if n < 2:
        raise ValueError("need at least two rows to fit principal components")
    if not 1 <= n_components <= min(n, p):
        raise ValueError(f"n_components={n_components} outside [1, min(n,p)={min(n, p)}]")
    means = X.mean(axis=0)
    scales = X.std(axis=0, ddof=1)
    bad = np.flatnonzero(scales <= 0)
    if bad.size:
        raise ValueError(f"zero-variance column(s) at index {bad.tolist()}")
    Z = (X - means) / scales
    corr = (Z.T @ Z) / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(corr)
    order = np.argsort(eigvals)[::-1][:n_components]
    explained = eigvals[order]
    loadings = eigvecs[:, order]
    # sign convention keeps factor paths comparable across estimation windows
    flip = np.sign(loadings[np.argmax(np.abs(loadings), axis=0), np.arange(n_components)])
    flip[flip == 0] = 1.0
    loadings = loadings * flip
    return PcaModel(means=means, scales=scales, loadings=loadings, explained=explained)


def transform_pca(model: PcaModel, X) -> np.ndarray:
    """Project rows of X onto the fitted components using the frozen scaler."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.means.size:
        raise ValueError(f"X has {X.shape[1]} columns, model expects {model.means.size}")
    return ((X - model.means) / model.scales) @ model.loadings


@dataclass(frozen=True)
class CoefficientPath:
    """Constant part, per-period deviations, and their sum beta_t."""

    constant: np.ndarray  # p
    deviations: np.ndarray  # T x p
    combined: np.ndarray  # T x p, constant + deviations

    @classmethod
    def from_flat(cls, beta, T: int, p: int) -> "CoefficientPath":
        beta = np.asarray(beta, dtype=float)
        if beta.size != (T + 1) * p:
            raise ValueError("flat coefficient vector has wrong length")
        constant = beta[:p].copy()
        deviations = beta[p:].reshape(T, p).copy()
        return cls(constant=constant, deviations=deviations, combined=constant + deviations)


class TvpDesignOperator:
    """Implicit T x (T+1)p design matrix of the static-form TVP regression.

    Only the T x p base regressor matrix is stored.  Row t has 2p structural
    nonzeros: columns [0, p) and columns [p + t*p, p + (t+1)*p) both hold x_t.
    """

    def __init__(self, base_rows):
        X = np.ascontiguousarray(np.asarray(base_rows, dtype=float))
        if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
            raise ValueError("base regressor matrix must be T x p with T, p >= 1")
        if np.any(~np.isfinite(X)):
            raise ValueError("base regressor matrix contains non-finite values")
        self.base_rows = X
        self.T, self.p = X.shape
        self.q = (self.T + 1) * self.p
        self._base_sq = X * X

    @property
    def shape(self):
        return (self.T, self.q)

    def _check_vec(self, v, size, what):
        v = np.asarray(v, dtype=float)
        if v.shape != (size,):
            raise ValueError(f"{what} must have shape ({size},), got {v.shape}")
        return v

    def forward(self, v) -> np.ndarray:
        """X @ v in O(Tp)."""
        v = self._check_vec(v, self.q, "input vector")
        tv = v[self.p:].reshape(self.T, self.p)
        return self.base_rows @ v[: self.p] + np.einsum("tp,tp->t", self.base_rows, tv)

    def adjoint(self, u) -> np.ndarray:
        """X.T @ u in O(Tp)."""
        u = self._check_vec(u, self.T, "input vector")
        out = np.empty(self.q)
        out[: self.p] = self.base_rows.T @ u
        out[self.p:] = (self.base_rows * u[:, None]).ravel()
        return out

    def forward_sq(self, v) -> np.ndarray:
        """(X**2) @ v, elementwise squared entries."""
        v = self._check_vec(v, self.q, "input vector")
        tv = v[self.p:].reshape(self.T, self.p)
        return self._base_sq @ v[: self.p] + np.einsum("tp,tp->t", self._base_sq, tv)

    def adjoint_sq(self, u) -> np.ndarray:
        """(X**2).T @ u, elementwise squared entries."""
        u = self._check_vec(u, self.T, "input vector")
        out = np.empty(self.q)
        out[: self.p] = self._base_sq.T @ u
        out[self.p:] = (self._base_sq * u[:, None]).ravel()
        return out

    def to_dense(self, max_q: int = 5000) -> np.ndarray:
        """Materialize the dense matrix; debugging helper only, guarded by size."""
        if self.q > max_q:
            raise ValueError(f"refusing to materialize q={self.q} > {max_q} columns")
        dense = np.zeros((self.T, self.q))
        dense[:, : self.p] = self.base_rows
        for t in range(self.T):
            dense[t, self.p + t * self.p: self.p + (t + 1) * self.p] = self.base_rows[t]
        return dense

    def dump_dense_csv(self, path):
        np.savetxt(path, self.to_dense(), delimiter=",", fmt="%.17g")

    def coefficient_path(self, beta) -> CoefficientPath:
        return CoefficientPath.from_flat(beta, self.T, self.p)


class DenseOperator:
    """Adapter giving a plain matrix the same product interface as the TVP operator."""

    def __init__(self, A):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] == 0 or A.shape[1] == 0:
            raise ValueError("design matrix must be 2-dimensional and nonempty")
        if np.any(~np.isfinite(A)):
            raise ValueError("design matrix contains non-finite values")
        self.A = A
        self.T, self.q = A.shape
        self._A_sq = A * A

    @property
    def shape(self):
        return (self.T, self.q)

    def forward(self, v):
        return self.A @ np.asarray(v, dtype=float)

    def adjoint(self, u):
        return self.A.T @ np.asarray(u, dtype=float)

    def forward_sq(self, v):
        return self._A_sq @ np.asarray(v, dtype=float)

    def adjoint_sq(self, u):
        return self._A_sq.T @ np.asarray(u, dtype=float)

    def coefficient_path(self, beta):
        return None


def build_tvp_operator(base_rows) -> TvpDesignOperator:
    """Construct the implicit static-form operator from the T x p regressors."""
    return TvpDesignOperator(base_rows)


def as_operator(A):
    """Wrap dense arrays; pass operators through unchanged."""
    if hasattr(A, "forward") and hasattr(A, "adjoint_sq"):
        return A
    return DenseOperator(A)
