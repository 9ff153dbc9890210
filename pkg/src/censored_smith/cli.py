"""Command-line interface.

Every command prints (or writes with ``--output``) one JSON document that
embeds the resolved configuration, its SHA-256 hash, the master seed and
library versions. Options can also come from a JSON file given with
``--config``; explicit flags win over the file.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure, 1 anything else raised by the library. Errors are reported as JSON
on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone

import numpy as np
import scipy

from . import __version__
from .distributions import GevMargin, gev_cdf, gev_quantile
from .errors import CensoredSmithError, ConfigError, DataError, ParameterDomainError
from .estimation import EstimatorSpec, fit, threshold_scan
from .extremes import (
    SeasonTemplate,
    cluster_stats,
    parametric_bootstrap,
    pot_fit,
    pot_return_level,
    qq_data,
    return_levels,
)
from .harness import direct_return_levels, table1, true_return_level, validation_curves
from .io import (
    WindowSpec,
    monthly_blocks,
    read_timeseries,
    records_to_series,
    window_extract,
    write_csv,
    write_series_csv,
)
from .likelihood import CensoredSample
from .rng import spawn
from .simulation import (
    ReferenceModelSpec,
    SamplingScheme,
    make_times,
    simulate_reference,
    simulate_smith,
)
from .smith import SmithParams

JOBS_ENV = "CENSORED_SMITH_JOBS"
_NOT_HASHED = {"config", "output", "csv", "command"}


def _default_jobs() -> int:
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


# --------------------------------------------------------------------------
# Parser


def _add_common(p):
    p.add_argument("--config", help="JSON file with option values")
    p.add_argument("--output", "-o", help="write the JSON result here instead of stdout")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--jobs", type=int, default=_default_jobs(), help=f"worker processes (default ${JOBS_ENV} or 1)")


def _add_data(p, spatial=False):
    p.add_argument("--input", "-i", required=False, help="CSV file with time,value" + (",lat,lon" if spatial else ""))
    p.add_argument("--threshold", type=float, help="censoring threshold in data units")
    p.add_argument("--quantile", type=float, help="censoring threshold as a quantile level of the data")
    p.add_argument("--month", type=int, help="fit one calendar month, one block per year")


def _add_estimator(p, fix_xi_default=None):
    p.add_argument("--estimator", choices=["mple", "mmle", "mile"], default="mple")
    p.add_argument("--strategy", choices=["index", "time"], default="index")
    p.add_argument("--K", type=float, default=1)
    p.add_argument("--fix-xi", type=float, default=fix_xi_default)


def _add_scheme(p):
    p.add_argument("--scheme", choices=["regular", "uniform_gaps"], default="regular")
    p.add_argument("--step", type=float, default=1.0, help="regular step (days)")
    p.add_argument("--gap-lo", type=float, default=0.0)
    p.add_argument("--gap-hi", type=float, default=2.0)


class _Parser(argparse.ArgumentParser):
    """Argument errors become :class:`ConfigError` so they get the JSON report."""

    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="censored-smith", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit the censored Smith model to a CSV series")
    _add_common(p)
    _add_data(p)
    _add_estimator(p)
    p.add_argument("--scan", type=_floats, help="quantile levels for a threshold-stability scan")
    p.add_argument("--csv", help="write threshold-scan or QQ data here")

    p = sub.add_parser("simulate", help="simulate a Smith process or a reference model")
    _add_common(p)
    _add_scheme(p)
    p.add_argument("--model", choices=["smith", "iid", "ar1", "logarmax", "ou"], default="smith")
    p.add_argument("--alpha", type=float, default=0.2, help="reference-model parameter")
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--xi", type=float, default=0.0)
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--n", type=int, help="number of observations")
    p.add_argument("--days", type=float, help="length of the record in days")
    p.add_argument("--csv", help="write the series here")

    p = sub.add_parser("return-level", help="cluster return levels of a Smith model")
    _add_common(p)
    _add_scheme(p)
    p.add_argument("--mu", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--xi", type=float)
    p.add_argument("--nu", type=float)
    p.add_argument("--fit-json", help="take parameters from the JSON output of 'fit'")
    p.add_argument("--T", type=_floats, default=[10.0, 20.0, 50.0, 100.0], help="return periods (years)")
    p.add_argument("--sim-years", type=float, default=1000.0)

    p = sub.add_parser("bootstrap", help="parametric bootstrap confidence intervals")
    _add_common(p)
    _add_data(p)
    _add_estimator(p)
    p.add_argument("--B", type=int, default=200)
    p.add_argument("--T", type=_floats, default=[10.0, 20.0, 50.0, 100.0])
    p.add_argument("--sim-years", type=float)
    p.add_argument("--xi-mode", choices=["free", "fixed", "both"], default="both")

    p = sub.add_parser("validate", help="reference-model validation experiments")
    _add_common(p)
    p.add_argument("--model", choices=["iid", "ar1", "logarmax", "ou"], default="iid")
    p.add_argument("--years", type=float, default=5.0)
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--T", type=float, default=100.0)
    p.add_argument("--sim-years", type=float, default=1000.0)
    p.add_argument("--methods", default="MPL1E,MMLE,POT")
    p.add_argument("--r-gap", type=float, default=3.0)
    p.add_argument("--curves", action="store_true", help="compute extremal curves on one long record instead")
    p.add_argument("--csv", help="write curve data here")

    p = sub.add_parser("pot", help="peaks-over-threshold baseline")
    _add_common(p)
    _add_data(p)
    p.add_argument("--r-gap", type=float, default=3.0, help="declustering gap (days)")
    p.add_argument("--T", type=_floats, default=[10.0, 20.0, 50.0, 100.0])
    p.add_argument("--obs-per-year", type=float, help="observations per year (default: from the time span)")

    p = sub.add_parser("grid", help="return levels on a lat/lon grid from track data")
    _add_common(p)
    p.add_argument("--input", "-i", help="CSV file with time,value,lat,lon")
    p.add_argument("--lat", type=_floats, help="latitudes of the grid")
    p.add_argument("--lon", type=_floats, help="longitudes of the grid")
    p.add_argument("--half-width", type=float, default=1.5)
    p.add_argument("--track-gap", type=float, default=30.0, help="minutes between distinct tracks")
    p.add_argument("--quantile", type=float, default=0.95)
    p.add_argument("--fix-xi", type=float, default=0.0)
    p.add_argument("--free-xi", action="store_true", help="estimate xi instead of fixing it")
    p.add_argument("--T", type=float, default=20.0)
    p.add_argument("--sim-years", type=float, default=200.0)
    p.add_argument("--csv", help="write lat,lon,level per cell here")
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        cfg.pop("command", None)
        known = set(vars(args))
        unknown = sorted(set(k.replace("-", "_") for k in cfg) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in cfg.items()})
        args = parser.parse_args(argv)
    return args


# --------------------------------------------------------------------------
# Helpers


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


def _resolved_config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_HASHED}


def config_hash(config: dict) -> str:
    text = json.dumps(_clean(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _envelope(args, result: dict) -> dict:
    config = _resolved_config(args)
    return {
        "command": args.command,
        "config": _clean(config),
        "config_hash": config_hash(config),
        "seed": args.seed,
        "versions": {
            "censored_smith": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "result": _clean(result),
    }


def _emit(args, doc: dict) -> None:
    text = json.dumps(doc, indent=2, sort_keys=False) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _require_input(args):
    if not args.input:
        raise ConfigError("--input is required")
    return read_timeseries(args.input)


def _threshold(args, values: np.ndarray) -> tuple[float, dict]:
    if (args.threshold is None) == (args.quantile is None):
        raise ConfigError("give exactly one of --threshold and --quantile")
    if args.quantile is not None:
        if not 0 < args.quantile < 1:
            raise ConfigError("--quantile must lie in (0, 1)")
        u = float(np.quantile(values, args.quantile))
        return u, {"u": u, "from_quantile": args.quantile}
    return float(args.threshold), {"u": float(args.threshold), "from_quantile": None}


def _load_series(args):
    records = _require_input(args)
    if args.month is not None:
        series, years = monthly_blocks(records, args.month)
        if len(series) == 0:
            raise DataError(f"no records in month {args.month}")
        return series, {"month": args.month, "years": years}
    return records_to_series(records, relative=True), {}


def _estimator_spec(args) -> EstimatorSpec:
    try:
        return EstimatorSpec(args.estimator, args.strategy, args.K, args.fix_xi)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _scheme(args) -> SamplingScheme:
    if args.scheme == "regular":
        return SamplingScheme.regular(args.step)
    return SamplingScheme.uniform_gaps(args.gap_lo, args.gap_hi)


def _sample(series, u) -> CensoredSample:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return CensoredSample(series.times, np.maximum(series.values, u), u, series.block_ids)


# --------------------------------------------------------------------------
# Commands


def cmd_fit(args) -> dict:
    series, extra = _load_series(args)
    u, thr = _threshold(args, series.values)
    spec = _estimator_spec(args)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = fit(_sample(series, u), spec)
    out = {"threshold": thr, "fit": res.as_dict(), **extra}
    if args.scan:
        levels = sorted(args.scan)
        us = np.quantile(series.values, levels)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            scan = threshold_scan(series, us, spec)
        path = scan.path()
        out["scan"] = {"quantiles": levels, "thresholds": us, "path": path, "skipped": scan.skipped}
        if args.csv:
            write_csv(args.csv, ["u", "mu", "sigma", "xi", "nu"], path.T)
    elif args.csv:
        p, qa, qb = qq_data(series.values[series.values > u], _conditional_model(res, u, series.values), 50)
        write_csv(args.csv, ["p", "empirical", "model"], [p, qa, qb])
    return out


def _conditional_model(res, u, values):
    """Model quantiles of the exceedances of ``u`` (for QQ data)."""
    m = res.theta_hat.margin
    exc = np.sort(values[values > u])
    p = (np.arange(1, exc.size + 1) - 0.5) / exc.size
    f_u = float(gev_cdf(u, m))
    return gev_quantile(f_u + (1.0 - f_u) * p, m)


def cmd_simulate(args) -> dict:
    scheme = _scheme(args)
    if (args.n is None) == (args.days is None):
        raise ConfigError("give exactly one of --n and --days")
    scheme = SamplingScheme(scheme.kind, scheme.step, scheme.lo, scheme.hi, None, args.days, args.n)
    if args.model == "smith":
        try:
            margin = GevMargin(args.mu, args.sigma, args.xi)
            SmithParams(margin, args.nu)
        except ParameterDomainError as exc:
            raise ConfigError(str(exc)) from exc
        s_times, s_values = spawn(args.seed, 2)
        times = make_times(scheme, s_times)
        series = simulate_smith(times, margin, args.nu, s_values)
        params = {"mu": args.mu, "sigma": args.sigma, "xi": args.xi, "nu": args.nu}
    else:
        series = simulate_reference(ReferenceModelSpec(args.model, args.alpha), scheme, args.seed)
        params = {"alpha": args.alpha}
    if args.csv:
        write_series_csv(args.csv, series)
    return {
        "model": args.model,
        "params": params,
        "n": len(series),
        "summary": {
            "min": float(series.values.min()) if len(series) else None,
            "max": float(series.values.max()) if len(series) else None,
            "mean": float(series.values.mean()) if len(series) else None,
        },
        "csv": args.csv,
    }


def cmd_return_level(args) -> dict:
    if args.fit_json:
        try:
            with open(args.fit_json) as fh:
                doc = json.load(fh)
            theta = doc["result"]["fit"]["theta"]
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read fit from {args.fit_json}: {exc}") from exc
        mu, sigma, xi, nu = theta["mu"], theta["sigma"], theta["xi"], theta["nu"]
    else:
        if None in (args.mu, args.sigma, args.xi, args.nu):
            raise ConfigError("give --mu --sigma --xi --nu or --fit-json")
        mu, sigma, xi, nu = args.mu, args.sigma, args.xi, args.nu
    if nu is None:
        raise ConfigError("the fit does not estimate nu")
    theta = SmithParams.from_values(mu, sigma, xi, nu)
    levels = return_levels(theta, _scheme(args), args.T, args.sim_years, args.seed)
    return {"theta": theta.as_dict(), "sim_years": args.sim_years, "levels": {f"q{T:g}": v for T, v in levels.items()}}


def cmd_bootstrap(args) -> dict:
    series, extra = _load_series(args)
    u, thr = _threshold(args, series.values)
    spec = _estimator_spec(args)
    if spec.kind.value == "mile":
        raise ConfigError("the bootstrap needs an estimator of nu (mple or mmle)")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = fit(_sample(series, u), spec)
    modes = ["free", "fixed"] if args.xi_mode == "both" else [args.xi_mode]
    template = None
    if series.block_ids is None:
        years = np.floor(series.times / 365.0).astype(np.int64)
        template = SeasonTemplate.from_sample(series.times - 365.0 * years, years) if years[-1] > 0 else None
    out = {"threshold": thr, "fit": res.as_dict(), "bootstrap": {}, **extra}
    for mode in modes:
        bs = parametric_bootstrap(
            res,
            series.times,
            series.block_ids,
            B=args.B,
            seed=args.seed,
            T_years=args.T,
            xi_mode=mode,
            sim_years=args.sim_years,
            template=template,
            jobs=args.jobs,
        )
        out["bootstrap"][mode] = bs.as_dict()
    return out


def cmd_validate(args) -> dict:
    if args.curves:
        cur = validation_curves(args.model, args.years, args.seed)
        if args.csv:
            ref, fitd = cur["reference"], cur["fitted"]
            keys = [k for k in ref if k != "level"]
            write_csv(
                args.csv,
                ["level"] + [f"reference_{k}" for k in keys] + [f"fitted_{k}" for k in keys],
                [ref["level"]] + [ref[k] for k in keys] + [fitd[k] for k in keys],
            )
        return {"model": args.model, "years": args.years, "fit": cur["fit"].as_dict(), "reference": cur["reference"], "fitted": cur["fitted"]}
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    rows = table1(
        args.model,
        reps=args.reps,
        seed=args.seed,
        years=args.years,
        T=args.T,
        sim_years=args.sim_years,
        methods=methods,
        jobs=args.jobs,
        r_gap=args.r_gap,
    )
    true = true_return_level(args.model, args.T)
    if true is None:
        true = float(np.mean(direct_return_levels(args.model, args.T, args.sim_years, seeds=(args.seed,))))
    return {
        "model": args.model,
        "years": args.years,
        "reps": args.reps,
        "T": args.T,
        "true_value": true,
        "rows": [rows[m].as_dict() for m in methods],
    }


def cmd_pot(args) -> dict:
    records = _require_input(args)
    series = records_to_series(records, relative=True)
    u, thr = _threshold(args, series.values)
    span_years = (series.times[-1] - series.times[0] + 1.0) / 365.0
    fit_ = pot_fit(series, u, args.r_gap, years=span_years)
    levels = {f"q{T:g}": pot_return_level(fit_, args.obs_per_year, T) for T in args.T}
    return {"threshold": thr, "pot": fit_.as_dict(), "levels": levels, "clusters": cluster_stats(series, u).__dict__}


def _grid_cell(task) -> dict:
    records, lat, lon, half_width, track_gap, quantile, spec, T, sim_years, seed = task
    cell = {"lat": lat, "lon": lon, "n": 0, "level": None, "note": None}
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            picked = window_extract(records, WindowSpec(lat, lon, half_width, track_gap))
            cell["n"] = len(picked)
            if len(picked) < 2:
                raise DataError("too few records in the window")
            series = records_to_series(picked, relative=True)
            u = float(np.quantile(series.values, quantile))
            res = fit(_sample(series, u), spec)
        years = np.floor(series.times / 365.0).astype(np.int64)
        template = SeasonTemplate.from_sample(series.times - 365.0 * years, years)
        level = return_levels(res.theta_hat, template, [T], sim_years, seed)[T]
        cell.update(level=level, u=u, theta=res.theta_hat.as_dict())
    except CensoredSmithError as exc:
        cell["note"] = str(exc)
    return cell


def cmd_grid(args) -> dict:
    records = _require_input(args)
    if not args.lat or not args.lon:
        raise ConfigError("--lat and --lon are required")
    fix_xi = None if args.free_xi else args.fix_xi
    spec = EstimatorSpec("mple", "index", 1, fix_xi)
    coords = [(lat, lon) for lat in args.lat for lon in args.lon]
    seeds = spawn(args.seed, len(coords))
    tasks = [
        (records, lat, lon, args.half_width, args.track_gap, args.quantile, spec, args.T, args.sim_years, s)
        for (lat, lon), s in zip(coords, seeds)
    ]
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            cells = list(pool.map(_grid_cell, tasks))
    else:
        cells = [_grid_cell(t) for t in tasks]
    if args.csv:
        write_csv(
            args.csv,
            ["lat", "lon", f"q{args.T:g}"],
            [[c["lat"] for c in cells], [c["lon"] for c in cells], [np.nan if c["level"] is None else c["level"] for c in cells]],
        )
    return {"T": args.T, "quantile": args.quantile, "fix_xi": fix_xi, "cells": cells}


COMMANDS = {
    "fit": cmd_fit,
    "simulate": cmd_simulate,
    "return-level": cmd_return_level,
    "bootstrap": cmd_bootstrap,
    "validate": cmd_validate,
    "pot": cmd_pot,
    "grid": cmd_grid,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        result = COMMANDS[args.command](args)
        _emit(args, _envelope(args, result))
        return 0
    except CensoredSmithError as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
        sys.stderr.write(json.dumps(err) + "\n")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
