"""Time-varying variance estimation.

The residual variance is estimated from log squared residuals, whose noise
distribution (log chi-squared with one degree of freedom) is approximated by a
seven-component Gaussian mixture.  A one-shot EM update for a constant
variance is provided for homoskedastic fits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LOG_OFFSET = 1e-10


@dataclass(frozen=True)
class MixtureTable:
    """Gaussian mixture approximation to the log chi-squared(1) density."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w, m, v = (np.asarray(a, dtype=float) for a in (self.weights, self.means, self.variances))
        if not (w.shape == m.shape == v.shape):
            raise ValueError("mixture component arrays must have equal length")
        if abs(w.sum() - 1.0) > 1e-5:
            raise ValueError(f"mixture weights sum to {w.sum():.7f}, expected 1 within 1e-5")
        if np.any(v <= 0):
            raise ValueError("mixture variances must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "variances", v)


# Seven-component approximation used by the volatility step.
MIXTURE7 = MixtureTable(
    weights=np.array([0.00730, 0.10556, 0.00002, 0.04395, 0.34001, 0.24566, 0.25750]),
    means=np.array([-10.12999, -3.97281, -8.56686, 2.77786, 0.61942, 1.79518, -1.08819]),
    variances=np.array([5.79596, 2.61369, 5.17950, 0.16735, 0.64009, 0.34023, 1.26261]),
)


@dataclass
class VolatilityPath:
    """Per-observation variance estimates and the log squared residuals."""

    sigma2: np.ndarray
    log_residuals: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        self.sigma2 = np.asarray(self.sigma2, dtype=float)
        if np.any(~np.isfinite(self.sigma2)) or np.any(self.sigma2 <= 0):
            raise ValueError("sigma2 must be strictly positive and finite")

    def to_csv(self, path, dates=None):
        """Write (date, sigma2) rows; dates default to 0..T-1."""
        import pandas as pd

        idx = np.arange(self.sigma2.size) if dates is None else dates
        pd.DataFrame({"date": idx, "sigma2": self.sigma2}).to_csv(path, index=False)


def sv_update(residuals, table: MixtureTable = MIXTURE7, mode: str = "seventh") -> VolatilityPath:
    """Update the variance path from current regression residuals.

    Each residual r_t is mapped to ytil_t = log(r_t^2 + 1e-10) and the variance
    estimate is exp(sum_i pi_i (ytil_t - mu_i) / 7).  ``mode="weighted_mean"``
    drops the division by the component count, i.e. exp(ytil_t - sum_i pi_i mu_i);
    the default reproduces the divided form verbatim.
    """
    r = np.asarray(residuals, dtype=float)
    if np.any(~np.isfinite(r)):
        raise ValueError("residuals must be finite")
    ytil = np.log(r * r + LOG_OFFSET)
    # literal component sum, not the algebraic shortcut ytil - sum(pi*mu)
    contrib = table.weights[None, :] * (ytil[:, None] - table.means[None, :])
    exponent = contrib.sum(axis=1)
    if mode == "seventh":
        exponent = exponent / table.weights.size
    elif mode != "weighted_mean":
        raise ValueError(f"unknown volatility mode {mode!r}")
    return VolatilityPath(sigma2=np.exp(exponent), log_residuals=ytil)


def em_constant_variance(residuals, c1: float = 0.01, c2: float = 0.01) -> float:
    """Posterior-mode update of a constant variance under an inverse-Gamma(c1, c2) prior."""
    r = np.asarray(residuals, dtype=float)
    T = r.size
    denom = T + 2.0 * c1 - 2.0
    if denom <= 0:
        raise ValueError(f"T + 2*c1 - 2 = {denom} must be positive")
    return float((2.0 * c2 + np.sum(r * r)) / denom)
