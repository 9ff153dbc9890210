"""Extremal summaries of observed and simulated series.

Up-crossings and sojourn (cluster) statistics, cluster-based return levels
computed by Monte-Carlo simulation of a fitted model, the classical
peaks-over-threshold baseline with runs declustering, the parametric
bootstrap and QQ data.

A year is 365 days throughout.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from math import ceil, log

import numpy as np
from scipy.optimize import minimize

from .distributions import GevMargin, GpdMargin, gev_quantile, gpd_logpdf
from .errors import (
    CensoredSmithError,
    ConfigError,
    DataError,
    InsufficientSimulationError,
    NonIdentifiableError,
)
from .estimation import MIN_EXCEEDANCES, EstimatorKind, EstimatorSpec, FitResult, OptimizerConfig, fit
from .rng import spawn
from .series import TimeSeries
from .simulation import SamplingScheme, SchemeKind, apply_censoring, make_times, simulate_smith
from .smith import SmithParams

DAYS_PER_YEAR = 365.0
DEFAULT_TS = (10.0, 20.0, 50.0, 100.0)


# --------------------------------------------------------------------------
# Runs, up-crossings and clusters


def _blocks(series: TimeSeries) -> np.ndarray:
    return series.blocks()


def _runs(mask: np.ndarray, blocks: np.ndarray):
    """Start and stop (exclusive) indices of maximal true runs that stay within one block."""
    if mask.size == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    m = mask.astype(np.int8)
    new_block = np.ones(mask.size, dtype=bool)
    new_block[1:] = blocks[1:] != blocks[:-1]
    prev = np.concatenate([[0], m[:-1]])
    prev[new_block] = 0
    starts = np.flatnonzero((m == 1) & (prev == 0))
    end_block = np.ones(mask.size, dtype=bool)
    end_block[:-1] = new_block[1:]
    nxt = np.concatenate([m[1:], [0]])
    nxt[end_block] = 0
    stops = np.flatnonzero((m == 1) & (nxt == 0)) + 1
    return starts, stops


def upcrossings(series: TimeSeries, level: float) -> int:
    """Number of consecutive pairs (within a block) going from ``<= level`` to ``> level``."""
    above = series.values > level
    same = series.blocks()[1:] == series.blocks()[:-1]
    return int(np.count_nonzero(same & ~above[:-1] & above[1:]))


@dataclass
class RunLengths:
    counts: np.ndarray
    days: np.ndarray

    def __len__(self) -> int:
        return self.counts.size


def cluster_lengths(series: TimeSeries, level: float, side: str = "above") -> RunLengths:
    """Lengths of maximal runs on one side of ``level``.

    Reported as observation counts and as the time span (days) between the
    first and last observation of each run.
    """
    if side not in ("above", "below"):
        raise ConfigError("side must be 'above' or 'below'")
    mask = series.values > level if side == "above" else series.values <= level
    starts, stops = _runs(mask, series.blocks())
    return RunLengths(stops - starts, series.times[stops - 1] - series.times[starts])


@dataclass
class ClusterStats:
    level: float
    n_upcrossings: int
    mean_cluster_length: float
    mean_cluster_days: float
    mean_gap_length: float
    mean_gap_days: float


def _mean(a) -> float:
    return float(np.mean(a)) if len(a) else float("nan")


def cluster_stats(series: TimeSeries, level: float) -> ClusterStats:
    above = cluster_lengths(series, level, "above")
    below = cluster_lengths(series, level, "below")
    return ClusterStats(
        level=float(level),
        n_upcrossings=upcrossings(series, level),
        mean_cluster_length=_mean(above.counts),
        mean_cluster_days=_mean(above.days),
        mean_gap_length=_mean(below.counts),
        mean_gap_days=_mean(below.days),
    )


def extremal_curves(series: TimeSeries, levels, years: float | None = None) -> dict:
    """Up-crossings per year and mean sojourn lengths as functions of the level."""
    levels = np.asarray(levels, dtype=float)
    if years is None:
        span = sum(float(t[-1] - t[0]) + 1.0 for t in _block_times(series))
        years = span / DAYS_PER_YEAR
    stats = [cluster_stats(series, lv) for lv in levels]
    return {
        "level": levels,
        "upcrossings_per_year": np.array([s.n_upcrossings for s in stats]) / years,
        "mean_cluster_length": np.array([s.mean_cluster_length for s in stats]),
        "mean_cluster_days": np.array([s.mean_cluster_days for s in stats]),
        "mean_gap_length": np.array([s.mean_gap_length for s in stats]),
        "mean_gap_days": np.array([s.mean_gap_days for s in stats]),
    }


def _block_times(series: TimeSeries):
    b = series.blocks()
    edges = np.flatnonzero(np.diff(b)) + 1
    return np.split(series.times, edges)


# --------------------------------------------------------------------------
# Cluster return levels


def cluster_count_level(values: np.ndarray, blocks: np.ndarray, k: int, base: float) -> float:
    """Largest level ``x >= base`` exceeded by at least ``k`` clusters.

    A cluster above ``x`` starts at ``i`` exactly when ``prev_i <= x < y_i``
    where ``prev_i`` is the preceding value in the same block (``-inf`` at a
    block start). The count ``N(x)`` is therefore a step function whose
    left limit at a candidate value ``y`` is ``#{prev < y} - #{y_i < y}``.
    """
    values = np.asarray(values, dtype=float)
    prev = np.concatenate([[-np.inf], values[:-1]])
    first = np.ones(values.size, dtype=bool)
    first[1:] = blocks[1:] != blocks[:-1]
    prev[first] = -np.inf
    keep = (values > base) & (prev < values)
    y = values[keep]
    p = np.maximum(prev[keep], base)
    if y.size < k:
        raise InsufficientSimulationError(
            f"only {y.size} clusters above the base level; {k} are needed"
        )
    ys = np.sort(y)
    ps = np.sort(p)
    n_left = np.searchsorted(ps, ys, side="left") - np.searchsorted(ys, ys, side="left")
    ok = n_left >= k
    if not np.any(ok):
        raise InsufficientSimulationError(f"fewer than {k} clusters above the base level")
    return float(ys[ok].max())


@dataclass(frozen=True)
class SeasonTemplate:
    """Within-year sampling made of independent seasonal blocks.

    ``blocks`` holds the relative times (days) of each observed season;
    simulated year ``y`` reuses ``blocks[y % len(blocks)]``.
    """

    blocks: tuple

    @classmethod
    def from_sample(cls, times, block_ids) -> "SeasonTemplate":
        times = np.asarray(times, dtype=float)
        block_ids = np.asarray(block_ids)
        edges = np.flatnonzero(np.diff(block_ids)) + 1
        parts = [t - t[0] for t in np.split(times, edges)]
        return cls(tuple(tuple(float(v) for v in t) for t in parts))

    def layout(self, years: int):
        parts = [np.asarray(self.blocks[y % len(self.blocks)]) for y in range(years)]
        ids = np.repeat(np.arange(years), [p.size for p in parts])
        return np.concatenate(parts), ids


def _simulation_layout(scheme, sim_years: float, seed):
    """Times and block labels for ``sim_years`` of simulated observations."""
    if isinstance(scheme, SeasonTemplate):
        return scheme.layout(int(ceil(sim_years)))
    if scheme.kind is SchemeKind.EXPLICIT:
        return SeasonTemplate((tuple(scheme.times),)).layout(int(ceil(sim_years)))
    times = make_times(scheme.with_horizon(sim_years * DAYS_PER_YEAR), seed)
    return times, np.zeros(times.size, dtype=np.int64)


def _check_theta(theta: SmithParams) -> None:
    if not theta.nu > 0:
        raise ConfigError("return levels need a fitted dependence range nu")


def return_levels(
    theta: SmithParams,
    scheme,
    T_years,
    sim_years: float = 1000.0,
    seed=0,
    base_quantile: float = 0.95,
) -> dict:
    """Cluster return levels for several return periods from one simulation.

    The ``T``-year level is the level exceeded by ``ceil(sim_years / T)``
    clusters in the simulated record, i.e. one cluster per ``T`` years.
    ``scheme`` is a :class:`SamplingScheme` (contiguous record, or one season
    per year for explicit times) or a :class:`SeasonTemplate`.
    """
    _check_theta(theta)
    T_years = [float(T) for T in np.atleast_1d(T_years)]
    if any(not T > 0 for T in T_years) or not sim_years > 0:
        raise ConfigError("return periods and simulation length must be positive")
    seed_times, seed_values = spawn(seed, 2)
    times, blocks = _simulation_layout(scheme, sim_years, seed_times)
    sim = simulate_smith(times, theta.margin, theta.nu, seed_values, block_ids=blocks)
    base = float(np.quantile(sim.values, base_quantile))
    out = {}
    for T in T_years:
        k = int(ceil(sim_years / T - 1e-9))
        out[T] = cluster_count_level(sim.values, sim.blocks(), k, base)
    return out


def return_level(theta: SmithParams, scheme, T_years: float, sim_years: float = 1000.0, seed=0, base_quantile: float = 0.95) -> float:
    return return_levels(theta, scheme, [T_years], sim_years, seed, base_quantile)[float(T_years)]


def empirical_return_level(series: TimeSeries, T_years: float, years: float, base_quantile: float = 0.95) -> float:
    """Cluster return level read directly off a long record spanning ``years``."""
    base = float(np.quantile(series.values, base_quantile))
    k = int(ceil(years / T_years - 1e-9))
    return cluster_count_level(series.values, series.blocks(), k, base)


# --------------------------------------------------------------------------
# Peaks over threshold


@dataclass
class PotFit:
    u: float
    lam: float
    gpd: GpdMargin
    r_gap: float
    n_clusters: int
    n: int
    n_below: int
    years: float
    loglik: float = float("nan")

    @property
    def n_exceed(self) -> int:
        return self.n - self.n_below

    @property
    def cluster_rate(self) -> float:
        """Clusters per year."""
        return self.n_clusters / self.years

    def as_dict(self) -> dict:
        return {
            "u": self.u,
            "lambda": self.lam,
            "sigma": self.gpd.sigma,
            "xi": self.gpd.xi,
            "r_gap": self.r_gap,
            "n_clusters": self.n_clusters,
            "n": self.n,
            "n_below": self.n_below,
            "n_exceed": self.n_exceed,
            "years": self.years,
            "loglik": self.loglik,
        }


def decluster(series: TimeSeries, u: float, r_gap: float = 3.0) -> np.ndarray:
    """Cluster maxima by runs declustering.

    Exceedances belong to the same cluster unless more than ``r_gap`` days
    separate them (with daily data: at least ``r_gap`` observations below
    ``u`` in between) or they lie in different blocks.
    """
    if not r_gap >= 0:
        raise ConfigError("r_gap must be non-negative")
    exc = np.flatnonzero(series.values > u)
    if exc.size == 0:
        return np.zeros(0)
    t = series.times[exc]
    b = series.blocks()[exc]
    new = np.ones(exc.size, dtype=bool)
    new[1:] = (np.diff(t) > r_gap) | (b[1:] != b[:-1])
    starts = np.flatnonzero(new)
    return np.maximum.reduceat(series.values[exc], starts)


def _fit_gpd(excess: np.ndarray):
    mean, var = float(np.mean(excess)), float(np.var(excess))
    xi0 = 0.5 * (1.0 - mean * mean / var) if var > 0 else 0.0
    xi0 = float(np.clip(xi0, -0.4, 0.9))
    sigma0 = max(mean * (1.0 - xi0), 1e-8)

    def nll(x):
        sigma, xi = sigma0 * np.exp(x[0]), x[1]
        if xi <= -1.0:
            return np.inf
        v = gpd_logpdf(excess, GpdMargin(0.0, sigma, xi))
        s = float(np.sum(v))
        return -s if np.isfinite(s) else np.inf

    x0 = np.array([0.0, xi0])
    if not np.isfinite(nll(x0)):
        x0 = np.array([log(max(excess.max(), 1e-8) / sigma0) + 1.0, 0.0])
    res = minimize(nll, x0, method="Nelder-Mead", options={"xatol": 1e-8, "fatol": 1e-10, "maxfev": 4000})
    res = minimize(nll, res.x, method="Nelder-Mead", options={"xatol": 1e-8, "fatol": 1e-10, "maxfev": 4000})
    return sigma0 * float(np.exp(res.x[0])), float(res.x[1]), -float(res.fun)


def pot_fit(series: TimeSeries, u: float, r_gap: float = 3.0, years: float | None = None) -> PotFit:
    """GPD fit to declustered excesses of ``u``.

    ``lam`` is the fraction of observations at or below ``u``. ``years``
    defaults to the number of observations over 365 (daily sampling).
    """
    values = series.values
    if not u < values.max():
        raise DataError("threshold must be below the sample maximum")
    maxima = decluster(series, u, r_gap)
    if maxima.size < MIN_EXCEEDANCES:
        raise NonIdentifiableError(
            f"only {maxima.size} cluster maxima above u; at least {MIN_EXCEEDANCES} are required"
        )
    n = values.size
    n_below = int(np.count_nonzero(values <= u))
    sigma, xi, ll = _fit_gpd(maxima - u)
    if years is None:
        years = n / DAYS_PER_YEAR
    return PotFit(
        u=float(u),
        lam=n_below / n,
        gpd=GpdMargin(float(u), sigma, xi),
        r_gap=float(r_gap),
        n_clusters=int(maxima.size),
        n=n,
        n_below=n_below,
        years=float(years),
        loglik=ll,
    )


def pot_return_level(pot: PotFit, obs_per_year: float | None = None, T: float = 100.0) -> float:
    """Level exceeded by one cluster per ``T`` years under the fitted GPD tail.

    ``obs_per_year`` rescales the record length when given (record length
    ``n / obs_per_year`` years); otherwise the fit's own ``years`` is used.
    """
    years = pot.n / obs_per_year if obs_per_year else pot.years
    m = pot.n_clusters / years * T
    sigma, xi = pot.gpd.sigma, pot.gpd.xi
    if abs(xi) < 1e-8:
        return pot.u + sigma * log(m)
    return pot.u + sigma * np.expm1(xi * log(m)) / xi


# --------------------------------------------------------------------------
# Parametric bootstrap


PARAM_NAMES = ("mu", "sigma", "xi", "nu")


@dataclass
class BootstrapDistribution:
    B: int
    theta_samples: np.ndarray
    derived_samples: dict
    point: dict
    intervals: dict
    n_dropped: int
    unreliable: bool
    xi_mode: str = "free"
    level: float = 0.95
    notes: list = field(default_factory=list)

    def table(self) -> dict:
        """``{quantity: (point, lo, hi)}`` in parameter then return-level order."""
        return {k: (self.point[k], *self.intervals[k]) for k in self.intervals}

    def as_dict(self) -> dict:
        return {
            "B": self.B,
            "xi_mode": self.xi_mode,
            "level": self.level,
            "n_dropped": self.n_dropped,
            "unreliable": self.unreliable,
            "table": {k: {"estimate": v[0], "lo": v[1], "hi": v[2]} for k, v in self.table().items()},
            "notes": list(self.notes),
        }


def _derived_name(T: float) -> str:
    return f"q{int(T)}" if float(T).is_integer() else f"q{T:g}"


def _replicate(args):
    (theta, times, block_ids, spec, cfg, Ts, template, sim_years, seed) = args
    s_data, s_rl = spawn(seed, 2)
    sim = simulate_smith(times, theta.margin, theta.nu, s_data, block_ids=block_ids)
    sample = apply_censoring(sim, theta.u)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = fit(sample, spec, cfg)
        if not res.converged:
            return None
        rl = return_levels(res.theta_hat, template, Ts, sim_years, s_rl) if Ts else {}
    except CensoredSmithError:
        return None
    return res.params, [rl[T] for T in Ts]


def parametric_bootstrap(
    fit_result: FitResult,
    times,
    block_ids=None,
    B: int = 200,
    seed=0,
    T_years=DEFAULT_TS,
    xi_mode: str = "free",
    sim_years: float | None = None,
    template=None,
    cfg: OptimizerConfig | None = None,
    jobs: int = 1,
    level: float = 0.95,
) -> BootstrapDistribution:
    """Percentile intervals from refits to data simulated at the original times.

    ``xi_mode="fixed"`` refits with the shape held at its point estimate.
    Replicates whose refit fails or does not converge are dropped and counted;
    more than 10% dropped flags the result as unreliable.
    """
    if B < 1:
        raise ConfigError("bootstrap needs B >= 1")
    if xi_mode not in ("free", "fixed"):
        raise ConfigError("xi_mode must be 'free' or 'fixed'")
    theta = fit_result.theta_hat
    if fit_result.spec.kind is EstimatorKind.MILE or not theta.nu > 0:
        raise ConfigError("the bootstrap needs a fit that estimates nu")
    times = np.asarray(times, dtype=float)
    block_ids = None if block_ids is None else np.asarray(block_ids, dtype=np.int64)
    Ts = [float(T) for T in (T_years or ())]
    if sim_years is None:
        sim_years = 10.0 * max(Ts) if Ts else 0.0
    if template is None:
        if block_ids is not None and np.unique(block_ids).size > 1:
            template = SeasonTemplate.from_sample(times, block_ids)
        else:
            template = SamplingScheme.regular(step=float(np.median(np.diff(times))), horizon=DAYS_PER_YEAR)
    spec = fit_result.spec
    if xi_mode == "fixed":
        spec = EstimatorSpec(spec.kind, spec.strategy, spec.K, fix_xi=theta.margin.xi)
    cfg = cfg or OptimizerConfig()

    seeds = spawn(seed, B + 1)
    tasks = [(theta, times, block_ids, spec, cfg, Ts, template, sim_years, s) for s in seeds[:B]]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_replicate, tasks, chunksize=max(1, B // (4 * jobs))))
    else:
        results = [_replicate(t) for t in tasks]

    good = [r for r in results if r is not None]
    n_dropped = B - len(good)
    notes = []
    if not good:
        raise NonIdentifiableError("every bootstrap replicate failed")
    thetas = np.array([g[0] for g in good])
    derived = {_derived_name(T): np.array([g[1][k] for g in good]) for k, T in enumerate(Ts)}

    point = dict(zip(PARAM_NAMES, map(float, fit_result.params)))
    if Ts:
        rl = return_levels(theta, template, Ts, sim_years, seeds[B])
        point.update({_derived_name(T): rl[T] for T in Ts})
    alpha = 0.5 * (1.0 - level)
    intervals = {}
    for k, name in enumerate(PARAM_NAMES):
        intervals[name] = tuple(float(v) for v in np.quantile(thetas[:, k], [alpha, 1 - alpha]))
    for name, arr in derived.items():
        intervals[name] = tuple(float(v) for v in np.quantile(arr, [alpha, 1 - alpha]))
    unreliable = n_dropped > 0.1 * B
    if unreliable:
        notes.append(f"{n_dropped} of {B} replicates dropped")
    return BootstrapDistribution(
        B=B,
        theta_samples=thetas,
        derived_samples=derived,
        point=point,
        intervals=intervals,
        n_dropped=n_dropped,
        unreliable=unreliable,
        xi_mode=xi_mode,
        level=level,
        notes=notes,
    )


# --------------------------------------------------------------------------
# QQ data


def qq_data(sample_a, sample_b, n_points: int = 100) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Matched quantiles ``(p, q_a, q_b)``; ``sample_b`` may be a :class:`GevMargin`."""
    a = np.asarray(sample_a, dtype=float)
    if a.size == 0 or n_points < 1:
        raise DataError("qq_data needs a nonempty sample and n_points >= 1")
    p = (np.arange(1, n_points + 1) - 0.5) / n_points
    qa = np.quantile(a, p)
    if isinstance(sample_b, GevMargin):
        qb = gev_quantile(p, sample_b)
    else:
        b = np.asarray(sample_b, dtype=float)
        if b.size == 0:
            raise DataError("qq_data needs nonempty samples")
        qb = np.quantile(b, p)
    return p, qa, qb
