"""Seeded synthetic-data generators for the Monte Carlo exercises.

All generators draw from a Philox counter-based bit generator keyed by
(seed, replication) through ``numpy.random.SeedSequence(entropy=seed,
spawn_key=(rep,))``, so every replication is an independent, bit-reproducible
stream.  Draw order within each generator is fixed and documented in the
function bodies; changing it would silently change every seeded result.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np

KINDS = ("poisson_jumps", "regression_effects", "random_walk", "sparse_regression", "ar4")

AR4_COEFFICIENTS = np.array([0.40, 0.22, 0.05, 0.14])
AR4_BURN_IN = 200


@dataclass(frozen=True)
class SimSpec:
    kind: str
    T: int
    p: int = 0
    rho: float = 0.0
    sparsity: float = 0.0
    lam: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}; choose from {KINDS}")
        if self.T < 2:
            raise ValueError("T must be at least 2")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        if self.kind == "sparse_regression":
            if self.p < 1:
                raise ValueError("sparse_regression needs p >= 1")
            if not 0.0 < self.sparsity < 1.0:
                raise ValueError("sparsity fraction must lie in (0, 1)")


@dataclass
class SimOutput:
    y: np.ndarray
    X: np.ndarray | None
    true_coef_path: np.ndarray  # T-vector / T x p for TVP kinds, p-vector for static kinds
    meta: dict[str, Any] = field(default_factory=dict)


def replication_rng(seed: int, rep: int = 0) -> np.random.Generator:
    """Philox stream for replication ``rep`` of a run keyed by ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(rep,))))


def simulate(spec: SimSpec, rep: int = 0) -> SimOutput:
    """Dispatch to the generator named by ``spec.kind``."""
    fn = {
        "poisson_jumps": simulate_poisson_jumps,
        "regression_effects": simulate_regression_effects,
        "random_walk": simulate_random_walk,
        "sparse_regression": simulate_sparse_regression,
        "ar4": simulate_ar4,
    }[spec.kind]
    return fn(spec, rep)


def simulate_poisson_jumps(spec: SimSpec, rep: int = 0) -> SimOutput:
    """Intercept-only model whose level jumps at Poisson-distributed times.

    c_t = mu + sign(delta_t) * mu * k_t + u_t with k_t ~ Poisson(lam),
    delta_t ~ U(-1, 1), u_t ~ N(0, T^(-3/4)), mu ~ U(0, 4); y_t = c_t + e_t
    with unit-variance noise.
    """
    rng = replication_rng(spec.seed, rep)
    T = spec.T
    # draw order: mu, k, delta, u, e
    mu = rng.uniform(0.0, 4.0)
    k = rng.poisson(spec.lam, size=T)
    delta = rng.uniform(-1.0, 1.0, size=T)
    u = rng.normal(0.0, T ** -0.375, size=T)
    e = rng.standard_normal(T)
    sign = np.where(delta >= 0.0, 1.0, -1.0)  # tie at 0 broken upward
    c = mu + sign * mu * k + u
    y = c + e
    return SimOutput(
        y=y,
        X=np.ones((T, 1)),
        true_coef_path=c,
        meta={"mu": float(mu), "jump_times": np.flatnonzero(k > 0).tolist(), "kind": spec.kind},
    )


def simulate_regression_effects(spec: SimSpec, rep: int = 0) -> SimOutput:
    """Intercept path driven by ten latent standard-normal regressors."""
    rng = replication_rng(spec.seed, rep)
    T = spec.T
    # draw order: beta (11), z (T x 10), u, e
    beta = rng.uniform(-1.0, 1.0, size=11)
    z = rng.standard_normal((T, 10))
    u = rng.normal(0.0, T ** -0.375, size=T)
    e = rng.standard_normal(T)
    c = beta[0] + z @ beta[1:] + u
    y = c + e
    return SimOutput(
        y=y,
        X=np.ones((T, 1)),
        true_coef_path=c,
        meta={"beta": beta.tolist(), "kind": spec.kind},
    )


def simulate_random_walk(spec: SimSpec, rep: int = 0) -> SimOutput:
    """Intercept following a random walk with increment variance T^(-1/2)."""
    rng = replication_rng(spec.seed, rep)
    T = spec.T
    # draw order: c0, u, e
    c0 = rng.uniform(-1.0, 1.0)
    u = rng.normal(0.0, T ** -0.25, size=T)
    e = rng.standard_normal(T)
    c = c0 + np.cumsum(u)
    y = c + e
    return SimOutput(
        y=y,
        X=np.ones((T, 1)),
        true_coef_path=c,
        meta={"c0": float(c0), "kind": spec.kind},
    )


def simulate_sparse_regression(spec: SimSpec, rep: int = 0) -> SimOutput:
    """Static regression with correlated predictors and a sparse coefficient vector.

    Columns have correlation rho^|i-j| imposed through a Cholesky transform of
    i.i.d. normals; the first round(c*p) coefficients are U(-4, 4) and the rest
    are exactly zero; y = X beta + e with unit noise.
    """
    rng = replication_rng(spec.seed, rep)
    T, p = spec.T, spec.p
    n_active = int(np.floor(spec.sparsity * p + 0.5))  # round half up
    if n_active == 0:
        warnings.warn("sparsity*p rounds to zero active coefficients", stacklevel=2)
    # draw order: Z (T x p), beta_active, e
    Z = rng.standard_normal((T, p))
    if spec.rho > 0:
        corr = spec.rho ** np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
        X = Z @ np.linalg.cholesky(corr).T
    else:
        X = Z
    beta = np.zeros(p)
    beta[:n_active] = rng.uniform(-4.0, 4.0, size=n_active)
    e = rng.standard_normal(T)
    y = X @ beta + e
    return SimOutput(
        y=y,
        X=X,
        true_coef_path=beta,
        meta={"active_set": list(range(n_active)), "kind": spec.kind},
    )


def simulate_ar4(spec: SimSpec, rep: int = 0) -> SimOutput:
    """Fourth-order autoregression with fixed coefficients and unit noise.

    A burn-in of 200 draws from a zero initial state is discarded; the
    returned y holds T observations and X the aligned four-lag design, so
    y = X @ coefficients + e row by row.
    """
    rng = replication_rng(spec.seed, rep)
    T = spec.T
    total = AR4_BURN_IN + T + 4
    e = rng.standard_normal(total)
    series = np.zeros(total)
    for t in range(4, total):
        series[t] = AR4_COEFFICIENTS @ series[t - 4:t][::-1] + e[t]
    tail = series[AR4_BURN_IN:]
    y = tail[4:]
    X = np.column_stack([tail[4 - k:len(tail) - k] for k in range(1, 5)])
    companion = np.zeros((4, 4))
    companion[0] = AR4_COEFFICIENTS
    companion[1:, :3] = np.eye(3)
    radius = float(np.max(np.abs(np.linalg.eigvals(companion))))
    return SimOutput(
        y=y,
        X=X,
        true_coef_path=AR4_COEFFICIENTS.copy(),
        meta={"spectral_radius": radius, "kind": spec.kind},
    )


def orthogonalize(X) -> np.ndarray:
    """Whiten columns so the sample covariance is the identity.

    Uses the Cholesky factor W of the sample covariance and returns X W^-1
    (per-column means are untouched).  Requires T >= p; a rank-deficient
    covariance is rejected.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    T, p = X.shape
    if T < p:
        raise np.linalg.LinAlgError(f"T={T} < p={p}: covariance factor is rank deficient")
    cov = np.cov(X, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("sample covariance is rank deficient") from exc
    return np.linalg.solve(L, X.T).T
