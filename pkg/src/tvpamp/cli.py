"""Batch command-line entry point.

Subcommands: simulate | fit | forecast | evaluate | benchmark.  Exit codes:
0 success, 2 usage error, 3 data error, 4 numerical failure.  Option
precedence is flags over config-file values over built-in defaults; every run
writes a manifest.json with the resolved configuration and sha256 hashes of
the artifacts it produced.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import dgp as dgp_mod
from .forecast import (
    ForecastSpec,
    cumulative_sfe,
    dm_statistic,
    log_apl,
    log_apl_spread,
    msfe,
    relative_msfe,
    run_recursive,
    squared_errors,
)
from .gamp import GampConfig, GampDivergenceError, gamp_solve
from .design import build_tvp_operator
from .ingest import read_panel_csv, transform_panel
from .oracles import GibbsConfig, ad_statistic, gibbs_lasso, gibbs_ssvs, ols, ols_per_predictor

FLOAT_FMT = "%.17g"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class UsageError(Exception):
    pass


def _fmt(value) -> str:
    return FLOAT_FMT % value


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(x if isinstance(x, str) else _fmt(x) for x in row) + "\n")


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(outdir: Path, subcommand: str, config: dict, artifacts):
    manifest = {
        "subcommand": subcommand,
        "config": config,
        "artifacts": {Path(a).name: sha256_file(a) for a in artifacts},
    }
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)


def _load_config_file(path):
    if path is None:
        return {}
    with open(path) as fh:
        loaded = json.load(fh)
    if not isinstance(loaded, dict):
        raise UsageError("config file must hold a JSON object")
    return loaded


def resolve(args: argparse.Namespace, keys) -> dict:
    """flags > config file > parser defaults (parser defaults passed as dict)."""
    file_cfg = _load_config_file(getattr(args, "config", None))
    out = {}
    for key, default in keys.items():
        cli_val = getattr(args, key, None)
        if cli_val is not None:
            out[key] = cli_val
        elif key in file_cfg:
            out[key] = file_cfg[key]
        else:
            out[key] = default
    return out


def _gamp_config(cfg: dict, no_shrink=()) -> GampConfig:
    return GampConfig(
        a=cfg.get("a", 1e-10),
        b=cfg.get("b", 1e-10),
        max_iter=cfg.get("max_iter", 1000),
        tol=cfg.get("tol", 1e-6),
        damping=cfg.get("damping", 0.9),
        variance_mode=cfg.get("variance_mode", "em_constant"),
        sigma2=cfg.get("sigma2", 1.0),
        alpha_update_mode=cfg.get("alpha_update_mode", "mean"),
        em_warmup=cfg.get("em_warmup", 25),
        no_shrink_columns=tuple(no_shrink),
        trace_path=cfg.get("trace_path"),
    )


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    cfg = resolve(args, {
        "kind": None, "T": 200, "p": 100, "rho": 0.0, "c": 0.05,
        "lam": 0.1, "seed": 0, "reps": 1, "out": "out",
    })
    if cfg["kind"] not in dgp_mod.KINDS:
        raise UsageError(f"unknown kind {cfg['kind']!r}; choose from {dgp_mod.KINDS}")
    if cfg["reps"] <= 0:
        raise UsageError("reps must be a positive integer")
    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    spec = dgp_mod.SimSpec(kind=cfg["kind"], T=cfg["T"], p=cfg["p"], rho=cfg["rho"],
                           sparsity=cfg["c"], lam=cfg["lam"], seed=cfg["seed"])
    artifacts = []
    for rep in range(cfg["reps"]):
        sim = dgp_mod.simulate(spec, rep)
        data_path = outdir / f"{cfg['kind']}_rep{rep:03d}.csv"
        header = ["y"] + [f"x{j + 1}" for j in range(sim.X.shape[1])]
        rows = [[sim.y[t]] + list(sim.X[t]) for t in range(len(sim.y))]
        write_csv(data_path, header, rows)
        meta_path = outdir / f"{cfg['kind']}_rep{rep:03d}.meta.json"
        meta = dict(sim.meta)
        meta.update({"seed": cfg["seed"], "rep": rep,
                     "true_coef_path": np.asarray(sim.true_coef_path).tolist()})
        with open(meta_path, "w") as fh:
            json.dump(meta, fh, indent=2)
        artifacts += [data_path, meta_path]
    write_manifest(outdir, "simulate", cfg, artifacts)
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit


def cmd_fit(args) -> int:
    cfg = resolve(args, {
        "input": None, "out": "out", "tvp": False, "variance_mode": "em_constant",
        "damping": 0.9, "tol": 1e-6, "max_iter": 1000, "a": 1e-10, "b": 1e-10,
        "sigma2": 1.0, "em_warmup": 25, "no_shrink": [],
    })
    if cfg["input"] is None:
        raise UsageError("fit requires --input")
    import pandas as pd

    frame = pd.read_csv(cfg["input"])
    if "y" not in frame.columns:
        raise ValueError("input CSV must contain a 'y' column")
    y = frame["y"].to_numpy(dtype=float)
    xcols = [c for c in frame.columns if c != "y"]
    X = frame[xcols].to_numpy(dtype=float)
    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)

    cfg["trace_path"] = str(outdir / "trace.csv")
    gcfg = _gamp_config(cfg, no_shrink=cfg["no_shrink"])
    A = build_tvp_operator(X) if cfg["tvp"] else X
    try:
        state, path, vol = gamp_solve(A, y, gcfg)
    except GampDivergenceError as exc:
        with open(outdir / "error.json", "w") as fh:
            json.dump({"error": str(exc), "iteration": exc.iteration}, fh, indent=2)
        print(f"fit: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    beta_path = outdir / "beta_path.csv"
    if path is not None:
        write_csv(beta_path, ["t"] + xcols, [[t] + list(row) for t, row in enumerate(path.combined)])
    else:
        write_csv(beta_path, xcols, [list(state.beta_hat)])
    vol_path = outdir / "volatility.csv"
    write_csv(vol_path, ["t", "sigma2"], list(enumerate(state.sigma2)))
    summary = {
        "iterations": state.iterations,
        "converged": bool(state.converged),
        "wall_time_sec": state.wall_time,
        "T": int(len(y)),
        "q": int(np.size(state.beta_hat)),
    }
    with open(outdir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    write_manifest(outdir, "fit", cfg, [beta_path, vol_path, outdir / "trace.csv", outdir / "summary.json"])
    return EXIT_OK


# ---------------------------------------------------------------------------
# forecast


def cmd_forecast(args) -> int:
    cfg = resolve(args, {
        "input": None, "tcodes": None, "target": None, "horizon": 1, "form": "gap",
        "factors": 20, "own_lags": 2, "factor_lags": [0, 1], "holdout": 0.5,
        "model": "tvp_gamp", "benchmark": False, "threads": 1, "out": "out",
        "variance_mode": "stochastic_volatility", "damping": 0.9, "tol": 1e-6,
        "max_iter": 1000, "a": 1e-10, "b": 1e-10, "em_warmup": 25,
    })
    if cfg["input"] is None or cfg["target"] is None:
        raise UsageError("forecast requires --input and --target")
    raw = read_panel_csv(cfg["input"], cfg["tcodes"])
    if cfg["target"] not in raw.series:
        raise ValueError(f"target {cfg['target']!r} not in panel")
    import pandas as pd

    price = pd.Series(raw.series[cfg["target"]], index=raw.dates)
    stationary = transform_panel(raw)
    pred_names = [n for n in stationary.series if n != cfg["target"]]
    predictors = stationary.to_frame(pred_names) if pred_names else None

    spec = ForecastSpec(horizon=cfg["horizon"], target_form=cfg["form"], n_factors=cfg["factors"],
                        own_lags=cfg["own_lags"], factor_lags=tuple(cfg["factor_lags"]),
                        holdout_fraction=cfg["holdout"], model=cfg["model"])
    gcfg = _gamp_config(cfg)
    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)

    result = run_recursive(predictors, price, spec, gcfg, threads=cfg["threads"])
    artifacts = [_write_forecast_outputs(outdir, "forecasts.csv", result)]
    metrics = {
        "model": spec.model,
        "msfe": msfe(result.records),
        "log_apl": log_apl(result.records),
        "n_origins": result.metadata["n_origins"],
        "n_diverged": result.metadata["n_diverged"],
    }
    if cfg["benchmark"]:
        bench_spec = ForecastSpec(horizon=cfg["horizon"], target_form=cfg["form"], n_factors=0,
                                  own_lags=cfg["own_lags"], factor_lags=(),
                                  holdout_fraction=cfg["holdout"], model="ar2")
        bench = run_recursive(predictors, price, bench_spec, threads=cfg["threads"])
        artifacts.append(_write_forecast_outputs(outdir, "bench_forecasts.csv", bench))
        metrics["relative_msfe"] = relative_msfe(result.records, bench.records)
        metrics["log_apl_spread"] = log_apl_spread(result.records, bench.records)
        metrics["dm_statistic"] = dm_statistic(
            squared_errors(result.records), squared_errors(bench.records), lag=spec.horizon - 1)

    cum = cumulative_sfe(result.records)
    cum_path = outdir / "cumsfe.csv"
    write_csv(cum_path, ["origin", "cum_sfe"], [[str(k), v] for k, v in cum.items()])
    artifacts.append(cum_path)
    metrics_path = outdir / "metrics.json"
    with open(metrics_path, "w") as fh:
        json.dump(metrics, fh, indent=2)
    artifacts.append(metrics_path)
    write_manifest(outdir, "forecast", cfg, artifacts)
    return EXIT_OK


def _write_forecast_outputs(outdir: Path, name: str, result) -> Path:
    path = outdir / name
    rows = [[str(r.origin), str(r.target), r.point, r.variance, r.realized] for r in result.records]
    write_csv(path, ["origin", "target", "point", "variance", "realized"], rows)
    return path


# ---------------------------------------------------------------------------
# evaluate


def cmd_evaluate(args) -> int:
    cfg = resolve(args, {"forecasts": None, "benchmark": None, "horizon": 1, "out": "out"})
    if cfg["forecasts"] is None:
        raise UsageError("evaluate requires --forecasts")
    import pandas as pd

    def load(path):
        frame = pd.read_csv(path)
        needed = {"origin", "point", "variance", "realized"}
        if not needed.issubset(frame.columns):
            raise ValueError(f"{path}: missing columns {sorted(needed - set(frame.columns))}")
        return frame

    model = load(cfg["forecasts"])
    err2 = (model["realized"] - model["point"]) ** 2
    metrics = {
        "msfe": float(err2.mean()),
        "log_apl": float(np.mean(
            -0.5 * np.log(2 * np.pi * model["variance"]) - err2 / (2 * model["variance"]))),
        "n_origins": int(len(model)),
    }
    if cfg["benchmark"] is not None:
        bench = load(cfg["benchmark"])
        if list(bench["origin"]) != list(model["origin"]):
            raise ValueError("origin sets differ between forecasts and benchmark")
        bench_err2 = (bench["realized"] - bench["point"]) ** 2
        metrics["relative_msfe"] = float(err2.mean() / bench_err2.mean())
        metrics["log_apl_benchmark"] = float(np.mean(
            -0.5 * np.log(2 * np.pi * bench["variance"]) - bench_err2 / (2 * bench["variance"])))
        metrics["log_apl_spread"] = metrics["log_apl"] - metrics["log_apl_benchmark"]
        metrics["dm_statistic"] = dm_statistic(
            err2.to_numpy(), bench_err2.to_numpy(), lag=cfg["horizon"] - 1)
    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    metrics_path = outdir / "metrics.json"
    with open(metrics_path, "w") as fh:
        json.dump(metrics, fh, indent=2)
    write_manifest(outdir, "evaluate", cfg, [metrics_path])
    return EXIT_OK


# ---------------------------------------------------------------------------
# benchmark


def _estimate_once(kind: str, estimator: str, sim, gcfg_base: dict):
    """Run one estimator on one replication; returns (ad, seconds)."""
    t0 = time.perf_counter()
    if kind in ("poisson_jumps", "regression_effects", "random_walk"):
        if estimator == "gamp":
            op = build_tvp_operator(sim.X)
            cfg = _gamp_config({**gcfg_base, "variance_mode": gcfg_base.get("variance_mode", "stochastic_volatility")})
            _, path, _ = gamp_solve(op, sim.y, cfg)
            est = path.combined[:, 0]
        elif estimator == "const":
            est = np.full(len(sim.y), np.mean(sim.y))
        else:
            raise UsageError(f"estimator {estimator!r} not defined for kind {kind!r}")
        ad = ad_statistic(est, sim.true_coef_path)
    elif kind == "sparse_regression":
        if estimator == "gamp":
            cfg = _gamp_config({**gcfg_base, "variance_mode": gcfg_base.get("variance_mode", "em_constant")})
            state, _, _ = gamp_solve(sim.X, sim.y, cfg)
            est = state.beta_hat
        elif estimator == "ols_per":
            est = ols_per_predictor(sim.X, sim.y)
        elif estimator == "lasso":
            est = gibbs_lasso(sim.X, sim.y, GibbsConfig(seed=gcfg_base["seed"])).beta_mean()
        elif estimator == "ssvs":
            est = gibbs_ssvs(sim.X, sim.y, GibbsConfig(seed=gcfg_base["seed"])).beta_mean()
        else:
            raise UsageError(f"estimator {estimator!r} not defined for kind {kind!r}")
        ad = ad_statistic(est, sim.true_coef_path)
    elif kind == "ar4":
        if estimator == "gamp":
            cfg = _gamp_config({**gcfg_base, "variance_mode": gcfg_base.get("variance_mode", "em_constant")})
            state, _, _ = gamp_solve(sim.X, sim.y, cfg)
            est = state.beta_hat
        elif estimator == "ols":
            est = ols(sim.X, sim.y)
        else:
            raise UsageError(f"estimator {estimator!r} not defined for kind {kind!r}")
        ad = ad_statistic(est, sim.true_coef_path)
    else:
        raise UsageError(f"unknown kind {kind!r}")
    return ad, time.perf_counter() - t0


def cmd_benchmark(args) -> int:
    cfg = resolve(args, {
        "kind": None, "T": 200, "p": [100], "rho": 0.3, "c": 0.05, "lam": 0.1,
        "estimators": ["gamp", "ols_per"], "reps": 10, "seed": 0, "threads": 1,
        "out": "out", "variance_mode": None,
    })
    if cfg["kind"] not in dgp_mod.KINDS:
        raise UsageError(f"unknown kind {cfg['kind']!r}; choose from {dgp_mod.KINDS}")
    if cfg["reps"] <= 0:
        raise UsageError("reps must be a positive integer")
    p_values = cfg["p"] if isinstance(cfg["p"], list) else [cfg["p"]]
    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    gcfg_base = {"seed": cfg["seed"]}
    if cfg["variance_mode"]:
        gcfg_base["variance_mode"] = cfg["variance_mode"]

    def task(p, rep):
        spec = dgp_mod.SimSpec(kind=cfg["kind"], T=cfg["T"], p=p, rho=cfg["rho"],
                               sparsity=cfg["c"], lam=cfg["lam"], seed=cfg["seed"])
        sim = dgp_mod.simulate(spec, rep)
        return [(p, rep, est, *_estimate_once(cfg["kind"], est, sim, gcfg_base))
                for est in cfg["estimators"]]

    jobs = [(p, rep) for p in p_values for rep in range(cfg["reps"])]
    if cfg["threads"] > 1:
        with ThreadPoolExecutor(max_workers=cfg["threads"]) as pool:
            nested = list(pool.map(lambda pr: task(*pr), jobs))
    else:
        nested = [task(*pr) for pr in jobs]
    results = [row for group in nested for row in group]

    ad_path = outdir / "ad.csv"
    write_csv(ad_path, ["rep", "estimator", "p", "ad", "seconds"],
              [[str(rep), est, str(p), ad, sec] for (p, rep, est, ad, sec) in results])

    timing_rows = []
    for p in p_values:
        row = [str(cfg["T"]), str(p)]
        for est in cfg["estimators"]:
            secs = [sec for (pp, _, ee, _, sec) in results if pp == p and ee == est]
            row.append(float(np.median(secs)))
        timing_rows.append(row)
    timing_path = outdir / "timing.csv"
    write_csv(timing_path, ["T", "p"] + list(cfg["estimators"]), timing_rows)
    write_manifest(outdir, "benchmark", cfg, [ad_path, timing_path])
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tvpamp", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--out", help="output directory")

    p_sim = sub.add_parser("simulate", help="generate synthetic datasets")
    add_common(p_sim)
    p_sim.add_argument("--kind")
    p_sim.add_argument("--T", type=int)
    p_sim.add_argument("--p", type=int)
    p_sim.add_argument("--rho", type=float)
    p_sim.add_argument("--c", type=float, help="active fraction for sparse_regression")
    p_sim.add_argument("--lam", type=float)
    p_sim.add_argument("--seed", type=int)
    p_sim.add_argument("--reps", type=int)

    p_fit = sub.add_parser("fit", help="solve one regression from a CSV")
    add_common(p_fit)
    p_fit.add_argument("--input")
    p_fit.add_argument("--tvp", action="store_const", const=True, default=None,
                       help="treat columns as base regressors of a TVP design")
    p_fit.add_argument("--variance-mode", dest="variance_mode",
                       choices=["known_constant", "em_constant", "stochastic_volatility"])
    p_fit.add_argument("--sigma2", type=float)
    p_fit.add_argument("--damping", type=float)
    p_fit.add_argument("--tol", type=float)
    p_fit.add_argument("--max-iter", dest="max_iter", type=int)
    p_fit.add_argument("--a", type=float)
    p_fit.add_argument("--b", type=float)
    p_fit.add_argument("--em-warmup", dest="em_warmup", type=int)
    p_fit.add_argument("--no-shrink", dest="no_shrink", type=int, nargs="*")

    p_fc = sub.add_parser("forecast", help="recursive out-of-sample forecasting")
    add_common(p_fc)
    p_fc.add_argument("--input", help="panel CSV (date column + mnemonics)")
    p_fc.add_argument("--tcodes", help="sidecar JSON with transform codes")
    p_fc.add_argument("--target", help="mnemonic of the price-level series")
    p_fc.add_argument("--horizon", type=int)
    p_fc.add_argument("--form", choices=["gap", "level"])
    p_fc.add_argument("--factors", type=int)
    p_fc.add_argument("--own-lags", dest="own_lags", type=int)
    p_fc.add_argument("--factor-lags", dest="factor_lags", type=int, nargs="*")
    p_fc.add_argument("--holdout", type=float)
    p_fc.add_argument("--model", choices=["tvp_gamp", "const_gamp", "ar2"])
    p_fc.add_argument("--benchmark", action="store_const", const=True, default=None,
                      help="also run the AR(2) benchmark and report relative metrics")
    p_fc.add_argument("--threads", type=int)
    p_fc.add_argument("--variance-mode", dest="variance_mode",
                      choices=["known_constant", "em_constant", "stochastic_volatility"])
    p_fc.add_argument("--damping", type=float)
    p_fc.add_argument("--tol", type=float)
    p_fc.add_argument("--max-iter", dest="max_iter", type=int)
    p_fc.add_argument("--em-warmup", dest="em_warmup", type=int)

    p_ev = sub.add_parser("evaluate", help="metrics from a forecasts CSV")
    add_common(p_ev)
    p_ev.add_argument("--forecasts")
    p_ev.add_argument("--benchmark")
    p_ev.add_argument("--horizon", type=int)

    p_bm = sub.add_parser("benchmark", help="Monte Carlo comparison of estimators")
    add_common(p_bm)
    p_bm.add_argument("--kind")
    p_bm.add_argument("--T", type=int)
    p_bm.add_argument("--p", type=int, nargs="*")
    p_bm.add_argument("--rho", type=float)
    p_bm.add_argument("--c", type=float)
    p_bm.add_argument("--lam", type=float)
    p_bm.add_argument("--estimators", nargs="*",
                      help="subset of gamp, const, ols, ols_per, lasso, ssvs")
    p_bm.add_argument("--reps", type=int)
    p_bm.add_argument("--seed", type=int)
    p_bm.add_argument("--threads", type=int)
    p_bm.add_argument("--variance-mode", dest="variance_mode",
                      choices=["known_constant", "em_constant", "stochastic_volatility"])
    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
    "benchmark": cmd_benchmark,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return COMMANDS[args.subcommand](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GampDivergenceError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, TypeError, KeyError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
