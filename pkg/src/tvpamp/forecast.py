"""Recursive out-of-sample forecasting and evaluation.

At every forecast origin t the pipeline re-fits principal components on
predictor data through t, assembles the direct h-step regression, solves it
with the message-passing estimator (or an OLS autoregressive benchmark), and
forecasts the h-period inflation target using the final-period coefficients.
Origins are mutually independent, so the loop can fan out over a thread pool
with a deterministic merge by origin date.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .design import build_tvp_operator, fit_pca, transform_pca
from .gamp import GampConfig, GampDivergenceError, gamp_solve
from .ingest import FrameSpec, RegressionFrame, make_regression_frame
from .oracles import ols

log = logging.getLogger(__name__)

MODELS = ("tvp_gamp", "const_gamp", "ar2")


@dataclass(frozen=True)
class ForecastSpec:
    horizon: int = 1
    target_form: str = "gap"  # gap: pi^h_{t+h} - pi_t ; level: pi^h_{t+h}
    n_factors: int = 20
    own_lags: int = 2
    factor_lags: tuple = (0, 1)
    holdout_fraction: float = 0.5
    model: str = "tvp_gamp"

    def __post_init__(self):
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must lie in (0, 1)")
        if self.n_factors < 0:
            raise ValueError("n_factors must be nonnegative")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")
        FrameSpec(self.horizon, self.target_form, self.own_lags, self.factor_lags)

    def frame_spec(self) -> FrameSpec:
        return FrameSpec(self.horizon, self.target_form, self.own_lags, self.factor_lags)


@dataclass
class ForecastRecord:
    origin: pd.Period
    target: pd.Period
    point: float  # forecast of pi^h on its own scale
    variance: float
    realized: float = np.nan

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError("predictive variance must be positive")

    @property
    def error(self) -> float:
        return self.realized - self.point


@dataclass
class RecursiveResult:
    records: list
    diverged: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)


def _compute_factors(predictors: pd.DataFrame | None, n_factors: int):
    """PCA factors from the aligned predictor block, or None when disabled."""
    if predictors is None or n_factors == 0 or predictors.shape[1] == 0:
        return None
    clean = predictors.dropna(how="any")
    if len(clean) < 2:
        raise ValueError("not enough complete predictor rows for principal components")
    k = min(n_factors, clean.shape[1], len(clean))
    model = fit_pca(clean.to_numpy(dtype=float), k)
    scores = transform_pca(model, clean.to_numpy(dtype=float))
    return pd.DataFrame(scores, index=clean.index, columns=[f"pc{i + 1}" for i in range(k)])


def _build_frame(predictors, price, spec: ForecastSpec) -> RegressionFrame:
    factors = None if spec.model == "ar2" else _compute_factors(predictors, spec.n_factors)
    return make_regression_frame(price, factors, spec.factor_lags, spec.frame_spec(), keep_tail=True)


def forecast_at_origin(predictors, price, origin, spec: ForecastSpec,
                       cfg: GampConfig | None = None) -> ForecastRecord:
    """Forecast pi^h at origin + h using data dated at or before the origin only.

    The inputs are truncated to the origin before any fitting, so the result
    cannot depend on later rows.  The returned record has realized = NaN; the
    recursive driver fills it in for evaluation.
    """
    origin = pd.Period(origin, freq="M")
    price = price[price.index <= _origin_stamp(price.index, origin)]
    if predictors is not None:
        predictors = predictors[predictors.index <= _origin_stamp(predictors.index, origin)]
    frame = _build_frame(predictors, price, spec)
    if frame.dates[-1] != origin:
        raise ValueError(f"origin {origin} has no complete regressor row (last is {frame.dates[-1]})")

    train = np.isfinite(frame.y)
    if not train.any():
        raise ValueError(f"no trainable rows at origin {origin}")
    X_train = frame.X[train]
    y_train = frame.y[train]
    x_now = frame.X[-1]

    if spec.model == "ar2":
        point_own, variance = _ols_forecast(X_train, y_train, x_now)
    else:
        point_own, variance = _gamp_forecast(X_train, y_train, x_now, frame, spec, cfg)

    point = point_own + (frame.pi_origin[-1] if spec.target_form == "gap" else 0.0)
    return ForecastRecord(origin=origin, target=origin + spec.horizon,
                          point=float(point), variance=float(variance))


def _origin_stamp(index, origin: pd.Period):
    """Value comparable to the index that marks the origin period."""
    if isinstance(index, pd.PeriodIndex):
        return origin
    return origin.to_timestamp(how="end")


def _ols_forecast(X_train, y_train, x_now):
    beta = ols(X_train, y_train)
    resid = y_train - X_train @ beta
    dof = max(len(y_train) - X_train.shape[1], 1)
    sigma2 = float(resid @ resid) / dof
    return float(x_now @ beta), max(sigma2, 1e-12)


def _gamp_forecast(X_train, y_train, x_now, frame, spec: ForecastSpec, cfg: GampConfig | None):
    cfg = cfg or GampConfig(variance_mode="stochastic_volatility")
    cfg = _with_no_shrink(cfg, frame.no_shrink)
    if spec.model == "tvp_gamp":
        op = build_tvp_operator(X_train)
        state, path, vol = gamp_solve(op, y_train, cfg)
        beta_last = path.combined[-1]
        tau = state.tau_beta
        p = op.p
        tau_active = tau[:p] + tau[p + (op.T - 1) * p: p + op.T * p]
    else:  # const_gamp
        state, _, vol = gamp_solve(X_train, y_train, cfg)
        beta_last = state.beta_hat
        tau_active = state.tau_beta
    point = float(x_now @ beta_last)
    variance = float(np.sum(x_now * x_now * tau_active) + vol.sigma2[-1])
    return point, variance


def _with_no_shrink(cfg: GampConfig, no_shrink) -> GampConfig:
    from dataclasses import replace

    return replace(cfg, no_shrink_columns=tuple(no_shrink))


def run_recursive(predictors, price, spec: ForecastSpec, cfg: GampConfig | None = None,
                  threads: int = 1) -> RecursiveResult:
    """Forecast at every holdout origin and attach realized targets.

    Origins are the last ``holdout_fraction`` share of the dates whose target
    is observable in-sample.  Divergent origins are excluded from the records
    and reported (never silently dropped).
    """
    if not isinstance(price, pd.Series):
        raise TypeError("price must be a pandas Series of levels")
    full_frame = _build_frame(predictors, price, spec)
    observable = np.isfinite(full_frame.y)
    eligible = full_frame.dates[observable]
    n = len(eligible)
    n_holdout = int(np.floor(n * spec.holdout_fraction))
    if n_holdout < 1:
        raise ValueError("holdout window is empty; need more observations")
    origins = list(eligible[n - n_holdout:])
    realized_map = dict(zip(full_frame.dates[observable], full_frame.y[observable]))
    pi_map = dict(zip(full_frame.dates, full_frame.pi_origin))

    def work(origin):
        try:
            return forecast_at_origin(predictors, price, origin, spec, cfg)
        except GampDivergenceError as exc:
            return (origin, exc)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, origins))
    else:
        results = [work(o) for o in origins]

    records, diverged = [], []
    for res in results:
        if isinstance(res, tuple):
            origin, exc = res
            diverged.append(origin)
            log.warning("origin %s excluded: %s", origin, exc)
            continue
        realized_own = realized_map[res.origin]
        # realized pi^h on its own scale regardless of the estimation form
        res.realized = float(realized_own + (pi_map[res.origin] if spec.target_form == "gap" else 0.0))
        records.append(res)
    if diverged:
        log.warning("%d of %d origins diverged and were excluded", len(diverged), len(origins))

    meta = {
        "model": spec.model,
        "horizon": spec.horizon,
        "target_form": spec.target_form,
        "n_origins": len(origins),
        "n_diverged": len(diverged),
        "coefficient_rule": "last in-sample period",
        "variance_rule": "posterior variance diagonal + last in-sample sigma2"
        if spec.model != "ar2" else "residual variance plug-in",
    }
    return RecursiveResult(records=records, diverged=diverged, metadata=meta)


# ---------------------------------------------------------------------------
# evaluation metrics


def squared_errors(records) -> np.ndarray:
    _require_realized(records)
    return np.array([(r.realized - r.point) ** 2 for r in records])


def msfe(records) -> float:
    """Mean squared forecast error over origins."""
    return float(np.mean(squared_errors(records)))


def relative_msfe(records, benchmark) -> float:
    """MSFE ratio on the identical origin set; raises if the origins differ."""
    _check_same_origins(records, benchmark)
    return msfe(records) / msfe(benchmark)


def log_apl(records) -> float:
    """Mean log predictive likelihood under Gaussian predictive densities."""
    _require_realized(records)
    vals = [
        -0.5 * np.log(2.0 * np.pi * r.variance) - (r.realized - r.point) ** 2 / (2.0 * r.variance)
        for r in records
    ]
    return float(np.mean(vals))


def log_apl_spread(records, benchmark) -> float:
    """Model log APL minus benchmark log APL; positive favors the model."""
    _check_same_origins(records, benchmark)
    return log_apl(records) - log_apl(benchmark)


def dm_statistic(loss_a, loss_b, lag: int = 0) -> float:
    """Diebold-Mariano statistic on per-origin losses.

    Mean loss differential over its HAC standard error (Bartlett kernel with
    ``lag`` autocovariances, i.e. horizon - 1 for direct h-step forecasts).
    Negative values favor the first loss sequence.
    """
    a = np.asarray(loss_a, dtype=float)
    b = np.asarray(loss_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("loss sequences must be 1-d and equally long")
    d = a - b
    n = d.size
    dbar = d.mean()
    centered = d - dbar
    var = centered @ centered / n
    for k in range(1, min(lag, n - 1) + 1):
        gamma_k = centered[k:] @ centered[:-k] / n
        var += 2.0 * (1.0 - k / (lag + 1.0)) * gamma_k
    if var <= 0:
        var = centered @ centered / n
    if var == 0:
        return 0.0
    return float(dbar / np.sqrt(var / n))


def cumulative_sfe(records) -> pd.Series:
    """Running sum of squared forecast errors indexed by origin date."""
    _require_realized(records)
    ordered = sorted(records, key=lambda r: r.origin)
    idx = pd.PeriodIndex([r.origin for r in ordered], freq="M")
    return pd.Series(np.cumsum([(r.realized - r.point) ** 2 for r in ordered]), index=idx)


def _require_realized(records):
    if len(records) == 0:
        raise ValueError("no forecast records")
    if any(not np.isfinite(r.realized) for r in records):
        raise ValueError("records contain unrealized targets")


def _check_same_origins(records, benchmark):
    if [r.origin for r in records] != [r.origin for r in benchmark]:
        raise ValueError("origin sets differ between model and benchmark")
