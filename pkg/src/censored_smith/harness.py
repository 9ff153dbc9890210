"""Validation experiments on reference time-series models.

* :func:`table1` - 100-year return levels estimated from short records,
  censored Smith fits versus the peaks-over-threshold baseline;
* :func:`validation_curves` - extremal curves of a long reference record and
  of the Smith process fitted to it;
* :func:`estimator_study` - repeated fits of simulated Smith data for error
  summaries by sample size, sampling scheme and estimator.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from math import log

import numpy as np
from scipy.stats import norm

from .errors import CensoredSmithError, ConfigError
from .estimation import EstimatorKind, EstimatorSpec, OptimizerConfig, fit
from .extremes import (
    DAYS_PER_YEAR,
    empirical_return_level,
    extremal_curves,
    pot_fit,
    pot_return_level,
    return_level,
)
from .rng import spawn
from .series import TimeSeries
from .simulation import (
    ReferenceModelSpec,
    SamplingScheme,
    apply_censoring,
    make_times,
    simulate_reference,
    simulate_smith,
)
from .smith import SmithParams

REFERENCE_ALPHA = {"iid": 0.2, "ar1": 0.2, "logarmax": 0.2, "ou": 0.05}
METHODS = ("MPL1E", "MMLE", "POT")


def reference_model(name: str) -> tuple[ReferenceModelSpec, SamplingScheme]:
    """Reference model and its sampling: daily, or U(0, 2) gaps for OU."""
    if name not in REFERENCE_ALPHA:
        raise ConfigError(f"unknown reference model {name!r}")
    spec = ReferenceModelSpec(name, REFERENCE_ALPHA[name])
    if name == "ou":
        return spec, SamplingScheme.uniform_gaps(0.0, 2.0)
    return spec, SamplingScheme.regular(1.0)


def true_return_level(name: str, T: float = 100.0) -> float | None:
    """Closed-form cluster return level on daily sampling, where one exists.

    Without extremal clustering this is the marginal quantile exceeded once
    every ``365 T`` days; the log-ARMAX process has extremal index ``alpha``
    and a Gumbel margin.
    """
    days = DAYS_PER_YEAR * T
    if name in ("iid", "ar1"):
        return float(norm.isf(1.0 / days))
    if name == "logarmax":
        return float(-log(-np.log1p(-1.0 / (days * REFERENCE_ALPHA[name]))))
    return None


def direct_return_levels(name: str, T: float = 100.0, sim_years: float = 1000.0, seeds=(0,)) -> np.ndarray:
    """Cluster return level read off long simulations of the reference model."""
    spec, scheme = reference_model(name)
    out = []
    for s in seeds:
        series = simulate_reference(spec, scheme.with_horizon(sim_years * DAYS_PER_YEAR), s)
        out.append(empirical_return_level(series, T, sim_years))
    return np.array(out)


def _estimator(method: str) -> EstimatorSpec:
    if method == "MMLE":
        return EstimatorSpec(EstimatorKind.MMLE)
    if method.startswith("MPL") and method.endswith("E"):
        return EstimatorSpec(EstimatorKind.MPLE, "index", int(method[3:-1]))
    raise ConfigError(f"unknown method {method!r}")


def table1_replicate(
    name: str,
    seed,
    years: float = 5.0,
    T: float = 100.0,
    sim_years: float = 1000.0,
    quantile: float = 0.95,
    r_gap: float = 3.0,
    methods=METHODS,
    cfg: OptimizerConfig | None = None,
) -> dict:
    """One synthetic record, censored at its ``quantile``; return level per method."""
    spec, scheme = reference_model(name)
    s_data, s_rl = spawn(seed, 2)
    series = simulate_reference(spec, scheme.with_horizon(years * DAYS_PER_YEAR), s_data)
    u = float(np.quantile(series.values, quantile))
    out = {}
    for method in methods:
        try:
            if method == "POT":
                out[method] = float(pot_return_level(pot_fit(series, u, r_gap, years=years), T=T))
                continue
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                res = fit(apply_censoring(series, u), _estimator(method), cfg)
            out[method] = return_level(res.theta_hat, scheme, T, sim_years, s_rl)
        except CensoredSmithError:
            out[method] = float("nan")
    return out


@dataclass
class Table1Row:
    method: str
    mean: float
    lo: float
    hi: float
    values: np.ndarray = field(repr=False)
    n_failed: int = 0

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def as_dict(self) -> dict:
        return {"method": self.method, "mean": self.mean, "lo": self.lo, "hi": self.hi, "n_failed": self.n_failed}


def _replicate_task(args):
    name, seed, kwargs = args
    return table1_replicate(name, seed, **kwargs)


def table1(
    name: str,
    reps: int = 200,
    seed=0,
    years: float = 5.0,
    T: float = 100.0,
    sim_years: float = 1000.0,
    methods=METHODS,
    band: float = 0.90,
    jobs: int = 1,
    **kwargs,
) -> dict:
    """Mean and central ``band`` fluctuation interval of the return level per method."""
    if reps < 1:
        raise ConfigError("reps must be >= 1")
    opts = dict(years=years, T=T, sim_years=sim_years, methods=methods, **kwargs)
    tasks = [(name, s, opts) for s in spawn(seed, reps)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_replicate_task, tasks))
    else:
        results = [_replicate_task(t) for t in tasks]
    a = 0.5 * (1.0 - band)
    rows = {}
    for method in methods:
        v = np.array([r[method] for r in results])
        ok = v[np.isfinite(v)]
        lo, hi = (np.quantile(ok, [a, 1 - a]) if ok.size else (np.nan, np.nan))
        rows[method] = Table1Row(method, float(np.mean(ok)) if ok.size else np.nan, float(lo), float(hi), v, int(v.size - ok.size))
    return rows


def validation_curves(
    name: str,
    years: float = 1000.0,
    seed=0,
    quantile: float = 0.95,
    levels=None,
    n_levels: int = 15,
    cfg: OptimizerConfig | None = None,
) -> dict:
    """Extremal curves of a long reference record and of its fitted Smith process.

    The fitted process is simulated at the same time stamps as the record.
    """
    spec, scheme = reference_model(name)
    s_data, s_sim = spawn(seed, 2)
    series = simulate_reference(spec, scheme.with_horizon(years * DAYS_PER_YEAR), s_data)
    u = float(np.quantile(series.values, quantile))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = fit(apply_censoring(series, u), EstimatorSpec(), cfg)
    theta = res.theta_hat
    model = simulate_smith(series.times, theta.margin, theta.nu, s_sim)
    if levels is None:
        levels = np.quantile(series.values, np.linspace(quantile, 0.9995, n_levels))
    return {
        "fit": res,
        "reference": extremal_curves(series, levels, years),
        "fitted": extremal_curves(TimeSeries(model.times, model.values), levels, years),
    }


def _study_task(args):
    theta, scheme, specs, cfg, seed = args
    s_times, s_values = spawn(seed, 2)
    times = make_times(scheme, s_times)
    sim = simulate_smith(times, theta.margin, theta.nu, s_values)
    sample = apply_censoring(sim, theta.u)
    row = np.full((len(specs), 4), np.nan)
    for k, spec in enumerate(specs):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                row[k] = fit(sample, spec, cfg).params
        except CensoredSmithError:
            pass
    return row


def estimator_study(
    theta: SmithParams,
    scheme: SamplingScheme,
    specs,
    reps: int = 200,
    seed=0,
    cfg: OptimizerConfig | None = None,
    jobs: int = 1,
) -> np.ndarray:
    """Estimates of ``(mu, sigma, xi, nu)``, shape ``(reps, len(specs), 4)``.

    Every estimator in ``specs`` sees the same simulated records.
    """
    tasks = [(theta, scheme, list(specs), cfg, s) for s in spawn(seed, reps)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_study_task, tasks))
    else:
        rows = [_study_task(t) for t in tasks]
    return np.stack(rows)


def error_summary(estimates: np.ndarray, theta: SmithParams) -> dict:
    """RMSE and median absolute error per parameter (NaN fits ignored)."""
    m = theta.margin
    truth = np.array([m.mu, m.sigma, m.xi, theta.nu])
    err = estimates - truth
    return {
        "rmse": np.sqrt(np.nanmean(err**2, axis=0)),
        "median_abs": np.nanmedian(np.abs(err), axis=0),
    }
