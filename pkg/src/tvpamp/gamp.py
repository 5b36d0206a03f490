"""Generalized approximate message passing for Gaussian-noise regression with
a conditionally Gaussian shrinkage prior.

The solver iterates two vectorized channel updates.  The output step turns the
current estimate of each linear combination z_t = x_t beta into a residual
score s_t and its precision; the input step combines the per-coefficient
pseudo-data d_i with the Normal(0, 1/alpha_i) prior.  The prior precisions
alpha_i are refreshed by an EM step, and the noise variance is either held
fixed, re-estimated as a constant, or tracked per observation through the
mixture-based volatility update.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .design import as_operator
from .volatility import MIXTURE7, VolatilityPath, sv_update, em_constant_variance

DIVERGENCE_LIMIT = 1e10


class GampDivergenceError(RuntimeError):
    """Raised when the coefficient iterates blow up or become non-finite."""

    def __init__(self, iteration: int, norm: float):
        self.iteration = iteration
        self.norm = norm
        super().__init__(f"GAMP diverged at iteration {iteration} (max|beta| = {norm:.3e})")


@dataclass
class GampConfig:
    """Solver settings.

    a, b are the Gamma hyperprior shape/rate of the coefficient precisions.
    variance_mode is one of "known_constant", "em_constant",
    "stochastic_volatility".  alpha_update_mode "mean" uses the Gamma
    posterior-mean EM step (2a+1)/(2b + beta^2); "paper" uses the posterior
    mode (2a-1)/(2b + beta^2), which goes negative for a < 1/2 and is then
    caught by the clamp.  The first em_warmup iterations run with the prior
    precisions frozen at alpha_init so the EM step sees a settled coefficient
    estimate.  no_shrink_columns are pinned at alpha_min and skipped by EM.
    """

    a: float = 1e-10
    b: float = 1e-10
    max_iter: int = 1000
    tol: float = 1e-6
    damping: float = 0.9
    alpha_min: float = 1e-8
    alpha_max: float = 1e12
    alpha_update_mode: str = "mean"
    variance_mode: str = "em_constant"
    sigma2: float = 1.0
    update_alpha: bool = True
    alpha_init: float = 1e-2
    em_warmup: int = 25
    no_shrink_columns: tuple = ()
    c1: float = 0.01
    c2: float = 0.01
    tau_beta_init: float = 100.0
    trace_path: str | None = None

    def __post_init__(self):
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must be in (0, 1]")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if not self.alpha_min < self.alpha_max:
            raise ValueError("alpha_min must be below alpha_max")
        if self.alpha_update_mode not in ("mean", "paper"):
            raise ValueError(f"unknown alpha_update_mode {self.alpha_update_mode!r}")
        if self.variance_mode not in ("known_constant", "em_constant", "stochastic_volatility"):
            raise ValueError(f"unknown variance_mode {self.variance_mode!r}")


@dataclass
class GampState:
    """All message quantities at the final iteration."""

    beta_hat: np.ndarray
    tau_beta: np.ndarray
    s_hat: np.ndarray
    c_hat: np.ndarray
    tau_c: np.ndarray
    z_hat: np.ndarray
    tau_z: np.ndarray
    d_hat: np.ndarray
    prec_d: np.ndarray
    alpha: np.ndarray
    sigma2: np.ndarray
    iterations: int = 0
    converged: bool = False
    wall_time: float = 0.0
    trace: list = field(default_factory=list, repr=False)


def gamp_output_step(c_hat, tau_c, y, sigma2):
    """AWGN output channel: posterior moments of z and the score (s, tau_s).

    Returns (z_hat, tau_z, s_hat, tau_s).  Algebraically s = (y - c)/(sigma2 +
    tau_c) and tau_s = 1/(sigma2 + tau_c); the composed form below is kept
    because it is the one whose intermediate z moments are reused.
    """
    c_hat = np.asarray(c_hat, dtype=float)
    tau_c = np.asarray(tau_c, dtype=float)
    y = np.asarray(y, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    if np.any(tau_c <= 0) or np.any(sigma2 <= 0):
        raise ValueError("tau_c and sigma2 must be strictly positive")
    tau_z = tau_c * sigma2 / (tau_c + sigma2)
    z_hat = tau_z * (y / sigma2 + c_hat / tau_c)
    s_hat = (z_hat - c_hat) / tau_c
    tau_s = (1.0 - tau_z / tau_c) / tau_c
    return z_hat, tau_z, s_hat, tau_s


def gamp_input_step(d_hat, prec_d, alpha):
    """Gaussian prior times Gaussian pseudo-likelihood.

    prec_d is the pseudo-data precision sum_t x_ti^2 tau_s_t; a zero entry
    (all-zero column) returns the prior (0, 1/alpha).
    """
    d_hat = np.asarray(d_hat, dtype=float)
    prec_d = np.asarray(prec_d, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if np.any(prec_d < 0) or np.any(alpha < 0):
        raise ValueError("prec_d and alpha must be nonnegative")
    denom = alpha + prec_d
    if np.any(denom == 0):
        raise ValueError("alpha + prec_d vanished: posterior is degenerate")
    beta_hat = prec_d * d_hat / denom
    tau_beta = 1.0 / denom
    return beta_hat, tau_beta


def em_alpha_update(beta_hat, tau_beta, cfg: GampConfig):
    """One EM refresh of the prior precisions, clamped to [alpha_min, alpha_max].

    Both modes share the (2b + beta^2) denominator; they differ in the
    numerator, (2a - 1) versus the sign-safe posterior mean (2a + 1).  The
    tau_beta argument is accepted for interface stability but does not enter
    the update: folding the posterior variance into the denominator caps the
    precision of weakly identified columns near 1/tau_beta, which stops them
    from ever pruning and stalls convergence on the time-dummy blocks.
    """
    beta_hat = np.asarray(beta_hat, dtype=float)
    if cfg.alpha_update_mode == "paper":
        raw = (2.0 * cfg.a - 1.0) / (2.0 * cfg.b + beta_hat * beta_hat)
    else:
        raw = (2.0 * cfg.a + 1.0) / (2.0 * cfg.b + beta_hat * beta_hat)
    return np.clip(raw, cfg.alpha_min, cfg.alpha_max)


def _init_alpha(cfg: GampConfig, q: int) -> np.ndarray:
    init = np.asarray(cfg.alpha_init, dtype=float)
    if init.ndim == 0:
        alpha = np.full(q, float(init))
    elif init.shape == (q,):
        alpha = init.copy()
    else:
        raise ValueError(f"vector alpha_init must have length {q}")
    if cfg.no_shrink_columns:
        alpha[list(cfg.no_shrink_columns)] = cfg.alpha_min
    return alpha


def gamp_solve(A, y, cfg: GampConfig | None = None):
    """Run GAMP to convergence on y = A beta + noise.

    A may be a TvpDesignOperator, a DenseOperator, or a plain 2-d array.
    Returns (state, path, vol) where path is the reconstructed coefficient
    path for TVP operators (None otherwise) and vol holds the final
    per-observation variances.
    """
    cfg = cfg or GampConfig()
    op = as_operator(A)
    T, q = op.shape
    y = np.asarray(y, dtype=float)
    if y.shape != (T,):
        raise ValueError(f"y must have shape ({T},), got {y.shape}")
    if np.any(~np.isfinite(y)):
        raise ValueError("y contains non-finite values")

    delta = cfg.damping
    beta = np.zeros(q)
    tau_beta = np.full(q, float(cfg.tau_beta_init))
    s_hat = np.zeros(T)
    tau_s = None
    alpha = _init_alpha(cfg, q)
    if cfg.variance_mode == "known_constant":
        if cfg.sigma2 <= 0:
            raise ValueError("known sigma2 must be positive")
        sigma2 = np.full(T, float(cfg.sigma2))
    else:
        sigma2 = np.ones(T)

    no_shrink = np.asarray(sorted(cfg.no_shrink_columns), dtype=int) if cfg.no_shrink_columns else None
    trace_rows = []
    converged = False
    it = 0
    t0 = time.perf_counter()
    c_hat = tau_c = z_hat = tau_z = d_hat = prec_d = None

    for it in range(1, cfg.max_iter + 1):
        tau_c = op.forward_sq(tau_beta)
        c_hat = op.forward(beta) - s_hat * tau_c
        z_hat, tau_z, s_new, tau_s_new = gamp_output_step(c_hat, tau_c, y, sigma2)
        s_hat = delta * s_new + (1.0 - delta) * s_hat
        tau_s = tau_s_new if tau_s is None else delta * tau_s_new + (1.0 - delta) * tau_s

        prec_d = op.adjoint_sq(tau_s)
        xs = op.adjoint(s_hat)
        with np.errstate(divide="ignore", invalid="ignore"):
            shift = np.where(prec_d > 0, xs / prec_d, 0.0)
        d_hat = beta + shift
        beta_new, tau_beta_new = gamp_input_step(d_hat, prec_d, alpha)
        beta_next = delta * beta_new + (1.0 - delta) * beta
        tau_beta = delta * tau_beta_new + (1.0 - delta) * tau_beta
        step = float(np.max(np.abs(beta_next - beta))) if q else 0.0
        beta = beta_next

        norm = float(np.max(np.abs(beta))) if q else 0.0
        if not np.isfinite(norm) or norm > DIVERGENCE_LIMIT or not np.all(np.isfinite(tau_beta)):
            raise GampDivergenceError(it, norm)

        if cfg.update_alpha and it >= max(cfg.em_warmup, 1):
            # letting the message passing settle before the first EM step keeps
            # genuinely time-varying coefficients from being pruned off a noisy
            # early beta estimate
            alpha = em_alpha_update(beta, tau_beta, cfg)
            if no_shrink is not None:
                alpha[no_shrink] = cfg.alpha_min

        residuals = None
        if cfg.variance_mode == "em_constant":
            residuals = y - op.forward(beta)
            sigma2 = np.full(T, em_constant_variance(residuals, cfg.c1, cfg.c2))
        elif cfg.variance_mode == "stochastic_volatility":
            residuals = y - op.forward(beta)
            sigma2 = sv_update(residuals, MIXTURE7).sigma2

        if cfg.trace_path is not None:
            if residuals is None:
                residuals = y - op.forward(beta)
            trace_rows.append((it, step, float(residuals @ residuals)))

        if step < cfg.tol:
            converged = True
            break

    wall = time.perf_counter() - t0
    final_resid = y - op.forward(beta)
    state = GampState(
        beta_hat=beta,
        tau_beta=tau_beta,
        s_hat=s_hat,
        c_hat=c_hat,
        tau_c=tau_c,
        z_hat=z_hat,
        tau_z=tau_z,
        d_hat=d_hat,
        prec_d=prec_d,
        alpha=alpha,
        sigma2=sigma2,
        iterations=it,
        converged=converged,
        wall_time=wall,
        trace=trace_rows,
    )
    if cfg.trace_path is not None:
        _write_trace(cfg.trace_path, trace_rows)
    path = op.coefficient_path(beta)
    vol = VolatilityPath(sigma2=sigma2.copy(), log_residuals=np.log(final_resid**2 + 1e-10))
    return state, path, vol


def _write_trace(path, rows):
    with open(path, "w") as fh:
        fh.write("iteration,delta_beta_inf,rss\n")
        for it, step, rss in rows:
            fh.write(f"{it},{step:.17g},{rss:.17g}\n")


def solve_fixed_alpha(A, y, alpha, sigma2: float, **kwargs):
    """Convenience wrapper: GAMP with EM off and a known constant variance."""
    cfg = GampConfig(
        update_alpha=False,
        alpha_init=alpha,
        variance_mode="known_constant",
        sigma2=sigma2,
        **kwargs,
    )
    return gamp_solve(A, y, cfg)
