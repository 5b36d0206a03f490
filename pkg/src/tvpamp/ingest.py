"""Panel ingestion and target construction for monthly macro data.

Reads CSV panels laid out like the public FRED-MD distribution: a ``date``
column of ISO-8601 stamps, one column per series mnemonic, and per-series
stationarity transformation codes either in a second header row (whose date
cell reads ``transform``) or in a sidecar JSON ``{"tcodes": {mnemonic: code}}``.

Transformation codes:
    1 level            4 log
    2 first difference 5 log first difference
    3 second difference 6 log second difference
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

VALID_CODES = (1, 2, 3, 4, 5, 6)
# observations lost at the head of a series, per code
DIFF_ORDER = {1: 0, 2: 1, 3: 2, 4: 0, 5: 1, 6: 2}
LOG_CODES = (4, 5, 6)


@dataclass
class RawPanel:
    """Levels panel: aligned dates, series in original units, transform codes."""

    dates: pd.PeriodIndex
    series: dict[str, np.ndarray]
    tcodes: dict[str, int]

    def __post_init__(self):
        if not self.dates.is_monotonic_increasing or self.dates.has_duplicates:
            raise ValueError("dates must be strictly increasing")
        n = len(self.dates)
        for name, values in self.series.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (n,):
                raise ValueError(f"series {name!r} length {values.shape} != {n} dates")
            if np.any(~np.isfinite(values)):
                raise ValueError(f"series {name!r} has missing or non-finite values")
            self.series[name] = values
        missing = set(self.series) - set(self.tcodes)
        if missing:
            raise ValueError(f"no transform code for series: {sorted(missing)}")
        for name, code in self.tcodes.items():
            if code not in VALID_CODES:
                raise ValueError(f"series {name!r} has invalid transform code {code}")


@dataclass
class StationaryPanel:
    """Transformed panel; the first ``leading_missing[name]`` entries of each
    series are NaN placeholders for observations lost to differencing."""

    dates: pd.PeriodIndex
    series: dict[str, np.ndarray]
    leading_missing: dict[str, int] = field(default_factory=dict)

    def to_frame(self, names=None) -> pd.DataFrame:
        names = list(self.series) if names is None else list(names)
        return pd.DataFrame({n: self.series[n] for n in names}, index=self.dates)

    def aligned_frame(self, names=None) -> pd.DataFrame:
        """Common-sample DataFrame: head rows with any NaN dropped, interior NaN rejected."""
        frame = self.to_frame(names)
        first_valid = int(frame.notna().all(axis=1).to_numpy().argmax())
        trimmed = frame.iloc[first_valid:]
        if trimmed.isna().any().any() or len(trimmed) == 0:
            raise ValueError("panel has interior missing values after head trim")
        return trimmed


def apply_transform(values, code: int, name: str = "series") -> np.ndarray:
    """Apply one stationarity transform; leading entries lost to differencing are NaN."""
    w = np.asarray(values, dtype=float)
    if w.size < 3:
        raise ValueError(f"{name}: need at least 3 observations, got {w.size}")
    if code not in VALID_CODES:
        raise ValueError(f"{name}: invalid transform code {code}")
    if code in LOG_CODES:
        bad = np.flatnonzero(w <= 0)
        if bad.size:
            raise ValueError(f"{name}: non-positive level at index {bad[0]} under log code {code}")
    out = np.full(w.shape, np.nan)
    if code == 1:
        out[:] = w
    elif code == 2:
        out[1:] = np.diff(w)
    elif code == 3:
        out[2:] = np.diff(w, n=2)
    elif code == 4:
        out[:] = np.log(w)
    elif code == 5:
        out[1:] = np.diff(np.log(w))
    else:
        out[2:] = np.diff(np.log(w), n=2)
    return out


def transform_panel(raw: RawPanel) -> StationaryPanel:
    series = {}
    leading = {}
    for name, values in raw.series.items():
        code = raw.tcodes[name]
        series[name] = apply_transform(values, code, name=name)
        leading[name] = DIFF_ORDER[code]
    return StationaryPanel(dates=raw.dates, series=series, leading_missing=leading)


def build_inflation_target(price, horizon: int) -> np.ndarray:
    """Annualized h-period log change of a price level: (1200/h) log(P_t / P_{t-h}).

    The first ``horizon`` entries are NaN.
    """
    if horizon <= 0:
        raise ValueError("horizon must be a positive number of periods")
    P = np.asarray(price, dtype=float)
    if np.any(P <= 0):
        raise ValueError("price levels must be strictly positive")
    out = np.full(P.shape, np.nan)
    out[horizon:] = (1200.0 / horizon) * (np.log(P[horizon:]) - np.log(P[:-horizon]))
    return out


@dataclass(frozen=True)
class FrameSpec:
    """Layout of the direct h-step forecasting regression.

    target_form "gap" regresses pi^h_{t+h} - pi_t on the differenced monthly
    inflation own-lags; "level" regresses pi^h_{t+h} on monthly inflation
    own-lags.  factor_lags are offsets applied to every predictor column.
    """

    horizon: int
    target_form: str = "gap"
    own_lags: int = 2
    factor_lags: tuple = (0, 1)

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.target_form not in ("gap", "level"):
            raise ValueError(f"target_form must be 'gap' or 'level', got {self.target_form!r}")
        if self.own_lags < 0:
            raise ValueError("own_lags must be nonnegative")


@dataclass
class RegressionFrame:
    """Aligned direct-forecast regression: row t carries regressors dated t
    and the target dated t + horizon."""

    y: np.ndarray
    X: np.ndarray
    dates: pd.PeriodIndex  # regressor dates
    columns: list[str]
    no_shrink: tuple  # intercept and own-lag column indices
    pi_origin: np.ndarray  # monthly inflation at each regressor date (gap add-back)
    spec: FrameSpec


def make_regression_frame(price: pd.Series, predictors: pd.DataFrame | None,
                          lags, spec: FrameSpec, keep_tail: bool = False) -> RegressionFrame:
    """Assemble (y, X) for the direct h-step regression.

    price is the raw price-level series (PeriodIndex or parseable index);
    predictors is a DataFrame of stationary columns (may be None or empty);
    lags are the offsets applied to each predictor column.  Rows with missing
    values are dropped from the head only.  With keep_tail=True the final
    ``horizon`` rows, whose targets are not yet observable, are kept with
    y = NaN so the caller can forecast from them.
    """
    if not isinstance(price, pd.Series):
        raise TypeError("price must be a pandas Series of levels")
    idx = _as_period_index(price.index)
    price = pd.Series(price.to_numpy(dtype=float), index=idx)
    h = spec.horizon
    lags = tuple(lags) if lags is not None else ()

    pi_h = pd.Series(build_inflation_target(price.to_numpy(), h), index=idx)
    pi_1 = pd.Series(build_inflation_target(price.to_numpy(), 1), index=idx)

    target = pi_h.shift(-h)  # row t holds pi^h_{t+h}
    if spec.target_form == "gap":
        target = target - pi_1
        own_base = pi_1.diff()
    else:
        own_base = pi_1

    cols = {"intercept": pd.Series(1.0, index=idx)}
    for k in range(spec.own_lags):
        cols[f"own_lag{k}"] = own_base.shift(k)
    if predictors is not None and predictors.shape[1] > 0:
        pred = predictors.copy()
        pred.index = _as_period_index(pred.index)
        for k in lags:
            for name in pred.columns:
                cols[f"{name}_lag{k}"] = pred[name].shift(k)

    X_frame = pd.DataFrame(cols)
    data = X_frame.join(target.rename("__target__"), how="inner")

    regressors_ok = data[X_frame.columns].notna().all(axis=1).to_numpy()
    if not regressors_ok.any():
        raise ValueError("no rows with complete regressors after alignment")
    first = int(regressors_ok.argmax())
    data = data.iloc[first:]
    if not data[X_frame.columns].notna().all(axis=1).all():
        raise ValueError("interior missing values in regressors")

    y_ok = data["__target__"].notna().to_numpy()
    if not keep_tail:
        data = data[y_ok]
    elif y_ok.any():
        # targets must be missing only in the trailing h rows
        last_obs = int(np.max(np.flatnonzero(y_ok)))
        if not y_ok[:last_obs + 1].all():
            raise ValueError("interior missing values in the target")
    if len(data) == 0:
        raise ValueError("empty regression frame after alignment")

    dates = pd.PeriodIndex(data.index)
    return RegressionFrame(
        y=data["__target__"].to_numpy(dtype=float),
        X=data[X_frame.columns].to_numpy(dtype=float),
        dates=dates,
        columns=list(X_frame.columns),
        no_shrink=tuple(range(1 + spec.own_lags)),
        pi_origin=pi_1.reindex(dates).to_numpy(dtype=float),
        spec=spec,
    )


def _as_period_index(index) -> pd.PeriodIndex:
    if isinstance(index, pd.PeriodIndex):
        return index
    return pd.DatetimeIndex(index).to_period("M")


def read_panel_csv(path, tcodes_path=None) -> RawPanel:
    """Read a panel CSV; codes come from a ``transform`` row or a sidecar JSON."""
    head = pd.read_csv(path, nrows=1)
    if head.columns[0] != "date":
        raise ValueError(f"first column must be named 'date', got {head.columns[0]!r}")
    first_cell = str(head.iloc[0, 0]).strip().lower() if len(head) else ""
    tcodes: dict[str, int] = {}
    if first_cell == "transform":
        codes_row = head.iloc[0, 1:]
        tcodes = {name: int(float(code)) for name, code in codes_row.items()}
        frame = pd.read_csv(path, skiprows=[1])
    else:
        frame = pd.read_csv(path)
    if tcodes_path is not None:
        with open(tcodes_path) as fh:
            sidecar = json.load(fh)
        if "tcodes" not in sidecar:
            raise ValueError("sidecar JSON must contain a 'tcodes' object")
        tcodes.update({str(k): int(v) for k, v in sidecar["tcodes"].items()})
    if not tcodes:
        raise ValueError("no transform codes: add a 'transform' row or a sidecar JSON")

    dates = pd.DatetimeIndex(pd.to_datetime(frame["date"], format="ISO8601")).to_period("M")
    series = {name: frame[name].to_numpy(dtype=float) for name in frame.columns if name != "date"}
    return RawPanel(dates=dates, series=series, tcodes=tcodes)
