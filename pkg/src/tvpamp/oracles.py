"""Reference estimators used for equivalence and accuracy testing.

These are deliberately plain implementations: ordinary least squares, the
closed-form Gaussian posterior of a known-variance ridge model, and two Gibbs
samplers (Bayesian lasso and stochastic search variable selection) whose
conditional posteriors are cycled exactly as printed in their sources.  All of
them are desk-scale chains for cross-checking the message-passing solver, not
production samplers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class GibbsConfig:
    n_save: int = 2000
    n_burn: int = 1000
    seed: int = 0
    lasso_r: float = 1.0
    lasso_delta: float = 3.0
    ssvs_pi0: float = 0.5
    ssvs_tau0: float = 0.001
    ssvs_tau1: float = 4.0

    def __post_init__(self):
        if self.n_save <= 0 or self.n_burn <= 0:
            raise ValueError("n_save and n_burn must be positive")
        if not self.ssvs_tau0 < self.ssvs_tau1:
            raise ValueError("ssvs_tau0 must be below ssvs_tau1")


@dataclass
class PosteriorDraws:
    beta: np.ndarray  # n_save x p
    sigma2: np.ndarray  # n_save
    inclusion: np.ndarray | None = None  # n_save x p of 0/1 (SSVS)
    lambda2: np.ndarray | None = None  # n_save (lasso)

    def __post_init__(self):
        if self.beta.shape[0] != self.sigma2.shape[0]:
            raise ValueError("beta and sigma2 draw counts differ")
        if np.any(self.sigma2 <= 0):
            raise ValueError("sigma2 draws must be positive")

    def beta_mean(self):
        return self.beta.mean(axis=0)

    def to_csv(self, path):
        import pandas as pd

        frame = pd.DataFrame(self.beta, columns=[f"beta{i}" for i in range(self.beta.shape[1])])
        frame["sigma2"] = self.sigma2
        if self.lambda2 is not None:
            frame["lambda2"] = self.lambda2
        frame.to_csv(path, index=False)


def ols(X, y):
    """Joint OLS coefficients; raises on a singular Gram matrix."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    gram = X.T @ X
    try:
        L = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("X'X is singular; joint OLS undefined") from exc
    rhs = X.T @ y
    return np.linalg.solve(L.T, np.linalg.solve(L, rhs))


def ols_per_predictor(X, y):
    """Slope of y on each column of X alone (no intercept)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    ss = np.einsum("tp,tp->p", X, X)
    if np.any(ss == 0):
        raise np.linalg.LinAlgError("all-zero predictor column")
    return (X * y[:, None]).sum(axis=0) / ss


def _chol_solve_psd(A, B):
    """Cholesky solve with one jittered retry; returns (solution, L)."""
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        L = np.linalg.cholesky(A + 1e-10 * np.eye(A.shape[0]))
    return np.linalg.solve(L.T, np.linalg.solve(L, B)), L


def exact_gaussian_posterior(X, y, alpha, sigma2: float, max_q: int = 2000):
    """Closed-form posterior mean and variance diagonal under a Gaussian prior.

    Solves (X'X/sigma2 + diag(alpha)) m = X'y/sigma2 and returns (m, diagonal
    of the inverse).  Guarded to q <= max_q since it factors the full matrix.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    T, q = X.shape
    if q > max_q:
        raise ValueError(f"q={q} exceeds the dense-posterior guard {max_q}")
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (q,))
    A = X.T @ X / sigma2 + np.diag(alpha)
    mean, L = _chol_solve_psd(A, X.T @ y / sigma2)
    Linv = np.linalg.solve(L, np.eye(q))
    var_diag = np.einsum("ij,ij->j", Linv, Linv)
    return mean, var_diag


def _sample_inverse_gaussian(rng, mu, lam, max_tries: int = 100):
    """Inverse-Gaussian draws with a finite-positivity guard and resampling."""
    mu = np.asarray(mu, dtype=float)
    out = rng.wald(mu, lam)
    for _ in range(max_tries):
        bad = ~np.isfinite(out) | (out <= 0)
        if not np.any(bad):
            return out
        out[bad] = rng.wald(mu[bad], lam)
    raise FloatingPointError("inverse-Gaussian sampler failed after 100 resampling rounds")


def gibbs_lasso(X, y, cfg: GibbsConfig | None = None) -> PosteriorDraws:
    """Gibbs sampler for the Bayesian lasso.

    Cycle: beta | ... ~ N((X'X + V^-1)^-1 X'y, sigma2 (X'X + V^-1)^-1) with
    V = diag(tau_j^2); 1/tau_j^2 | ... ~ InvGaussian(sqrt(lambda2 sigma2 /
    beta_j^2), lambda2); lambda2 | ... ~ Gamma(p + r, delta + sum(tau^2)/2);
    sigma2 | ... ~ invGamma((T-1)/2 + p/2, RSS/2 + beta' V^-1 beta / 2).
    """
    cfg = cfg or GibbsConfig()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    T, p = X.shape
    if T <= 2:
        raise ValueError("need more than two observations")
    rng = np.random.default_rng(cfg.seed)
    XtX = X.T @ X
    Xty = X.T @ y

    inv_tau2 = np.ones(p)
    lambda2 = 1.0
    sigma2 = 1.0
    keep_beta = np.empty((cfg.n_save, p))
    keep_sigma2 = np.empty(cfg.n_save)
    keep_lambda2 = np.empty(cfg.n_save)

    for sweep in range(cfg.n_burn + cfg.n_save):
        A = XtX + np.diag(inv_tau2)
        mean, L = _chol_solve_psd(A, Xty)
        beta = mean + np.sqrt(sigma2) * np.linalg.solve(L.T, rng.standard_normal(p))

        mu = np.sqrt(lambda2 * sigma2 / np.maximum(beta * beta, 1e-300))
        inv_tau2 = _sample_inverse_gaussian(rng, mu, lambda2)

        tau2 = 1.0 / inv_tau2
        lambda2 = rng.gamma(p + cfg.lasso_r, 1.0 / (0.5 * tau2.sum() + cfg.lasso_delta))

        resid = y - X @ beta
        rate = 0.5 * resid @ resid + 0.5 * np.sum(beta * beta * inv_tau2)
        sigma2 = rate / rng.gamma(0.5 * (T - 1) + 0.5 * p)

        if sweep >= cfg.n_burn:
            k = sweep - cfg.n_burn
            keep_beta[k] = beta
            keep_sigma2[k] = sigma2
            keep_lambda2[k] = lambda2

    return PosteriorDraws(beta=keep_beta, sigma2=keep_sigma2, lambda2=keep_lambda2)


def ssvs_inclusion_probability(beta, pi0, tau0, tau1):
    """Posterior inclusion probability of the printed Bernoulli odds."""
    beta = np.asarray(beta, dtype=float)
    # log-space ratio of the slab and spike densities avoids underflow at |beta| >> tau0
    log_ratio = (np.log(tau0) - np.log(tau1)) + 0.5 * beta * beta * (1.0 / tau0**2 - 1.0 / tau1**2)
    with np.errstate(over="ignore"):
        odds = (1.0 - pi0) / pi0 * np.exp(-log_ratio)
    return 1.0 / (1.0 + odds)


def gibbs_ssvs(X, y, cfg: GibbsConfig | None = None) -> PosteriorDraws:
    """Gibbs sampler for the two-component Gaussian (spike and slab) prior.

    Cycle: beta | ... ~ N((X'X/sigma2 + V^-1)^-1 X'y/sigma2, (X'X/sigma2 +
    V^-1)^-1) where V mixes tau0^2/tau1^2 by the inclusion flags; gamma_i |
    ... ~ Bernoulli of the density ratio at 0; sigma2 | ... ~ invGamma(T/2,
    RSS/2).  Note V is not scaled by sigma2, matching the printed conditional.
    """
    cfg = cfg or GibbsConfig()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    T, p = X.shape
    if T <= 2:
        raise ValueError("need more than two observations")
    rng = np.random.default_rng(cfg.seed)
    XtX = X.T @ X
    Xty = X.T @ y

    gamma = np.ones(p, dtype=int)
    sigma2 = 1.0
    keep_beta = np.empty((cfg.n_save, p))
    keep_sigma2 = np.empty(cfg.n_save)
    keep_gamma = np.empty((cfg.n_save, p), dtype=int)

    for sweep in range(cfg.n_burn + cfg.n_save):
        v_inv = np.where(gamma == 1, cfg.ssvs_tau1**-2, cfg.ssvs_tau0**-2)
        A = XtX / sigma2 + np.diag(v_inv)
        mean, L = _chol_solve_psd(A, Xty / sigma2)
        beta = mean + np.linalg.solve(L.T, rng.standard_normal(p))

        prob = ssvs_inclusion_probability(beta, cfg.ssvs_pi0, cfg.ssvs_tau0, cfg.ssvs_tau1)
        gamma = (rng.random(p) < prob).astype(int)

        resid = y - X @ beta
        sigma2 = (0.5 * resid @ resid) / rng.gamma(0.5 * T)

        if sweep >= cfg.n_burn:
            k = sweep - cfg.n_burn
            keep_beta[k] = beta
            keep_sigma2[k] = sigma2
            keep_gamma[k] = gamma

    return PosteriorDraws(beta=keep_beta, sigma2=keep_sigma2, inclusion=keep_gamma)


def ad_statistic(estimate, truth) -> float:
    """Mean absolute deviation between an estimate and the generating truth."""
    est = np.asarray(estimate, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if est.shape != tru.shape:
        raise ValueError(f"shape mismatch {est.shape} vs {tru.shape}")
    return float(np.mean(np.abs(est - tru)))
