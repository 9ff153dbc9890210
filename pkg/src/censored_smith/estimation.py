"""Maximum composite-likelihood estimation of the censored Smith model.

Every estimator runs in up to three stages:

1. the independence likelihood is maximised over the margin ``(mu, sigma, xi)``;
2. the dependence range ``nu`` is found by a one-dimensional search with the
   margin held fixed;
3. all four parameters are refined jointly from the stage-2 point.

Stages 2 and 3 are skipped for the independence estimator. The simplex
search works on standardised coordinates

    mu = mu0 + sigma0 * p,   sigma = sigma0 * exp(q),   xi = b * tanh(e),
    log nu = log nu_lo + (log nu_hi - log nu_lo) * expit(r)

so that ``sigma > 0``, ``|xi| < b`` and ``nu`` in its search interval hold
by construction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum
from math import log, sqrt

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from .distributions import GevMargin
from .errors import ConfigError, NonIdentifiableError
from .likelihood import CensoredSample, CompositeLikelihood, PairStrategy, build_pair_plan
from .series import TimeSeries
from .smith import SmithParams

MIN_EXCEEDANCES = 10
_GOLDEN = (sqrt(5.0) - 1.0) / 2.0
_R_CLAMP = 30.0


class EstimatorKind(str, Enum):
    MILE = "mile"
    MPLE = "mple"
    MMLE = "mmle"


@dataclass(frozen=True)
class EstimatorSpec:
    """Which composite likelihood to maximise.

    ``fix_xi`` holds the shape parameter fixed at the given value.
    """

    kind: EstimatorKind = EstimatorKind.MPLE
    strategy: PairStrategy = PairStrategy.INDEX
    K: float = 1
    fix_xi: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", EstimatorKind(self.kind))
        object.__setattr__(self, "strategy", PairStrategy(self.strategy))
        if self.strategy is PairStrategy.INDEX and (int(self.K) != self.K or self.K < 1):
            raise ConfigError("index window K must be an integer >= 1")
        if self.strategy is PairStrategy.TIME and not self.K > 0:
            raise ConfigError("time window K must be positive")
        if self.fix_xi is not None and not np.isfinite(self.fix_xi):
            raise ConfigError("fix_xi must be finite")

    @property
    def label(self) -> str:
        if self.kind is EstimatorKind.MILE:
            return "MILE"
        if self.kind is EstimatorKind.MMLE:
            return "MMLE"
        k = int(self.K) if float(self.K).is_integer() else self.K
        suffix = "" if self.strategy is PairStrategy.INDEX else "-time"
        return f"MPL{k}E{suffix}"

    def as_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "strategy": self.strategy.value,
            "K": self.K,
            "fix_xi": self.fix_xi,
        }


@dataclass(frozen=True)
class OptimizerConfig:
    max_evals: int = 4000
    xatol: float = 1e-6
    fatol: float = 1e-8
    restarts: int = 1
    xi_bound: float = 0.95
    nu_bounds: tuple[float, float] = (1e-3, 1e3)
    golden_tol: float = 1e-5
    grid_points: int = 61
    min_exceedances: int = MIN_EXCEEDANCES

    def __post_init__(self):
        if not (self.xatol > 0 and self.fatol > 0 and self.golden_tol > 0):
            raise ConfigError("optimizer tolerances must be positive")
        if self.max_evals < 10 or self.restarts < 0:
            raise ConfigError("max_evals must be >= 10 and restarts >= 0")
        if not 0 < self.xi_bound:
            raise ConfigError("xi_bound must be positive")
        lo, hi = self.nu_bounds
        if not 0 < lo < hi:
            raise ConfigError("nu_bounds must satisfy 0 < lo < hi")
        if self.grid_points < 3:
            raise ConfigError("grid_points must be at least 3")


@dataclass
class FitResult:
    theta_hat: SmithParams
    objective: float
    estimator: str
    spec: EstimatorSpec
    converged: bool
    n_evals: int
    stage_trace: dict = field(default_factory=dict)
    n: int = 0
    n_exceedances: int = 0
    notes: list = field(default_factory=list)

    @property
    def params(self) -> np.ndarray:
        m = self.theta_hat.margin
        return np.array([m.mu, m.sigma, m.xi, self.theta_hat.nu])

    def as_dict(self) -> dict:
        return {
            "estimator": self.estimator,
            "spec": self.spec.as_dict(),
            "theta": self.theta_hat.as_dict(),
            "objective": self.objective,
            "converged": self.converged,
            "n_evals": self.n_evals,
            "stage_trace": dict(self.stage_trace),
            "n": self.n,
            "n_exceedances": self.n_exceedances,
            "notes": list(self.notes),
        }


class _Coordinates:
    """Map between standardised search coordinates and model parameters."""

    def __init__(self, init: GevMargin, cfg: OptimizerConfig, fix_xi: float | None):
        self.mu0 = init.mu
        self.sigma0 = init.sigma
        self.b = cfg.xi_bound
        self.fix_xi = fix_xi
        self.lo = log(cfg.nu_bounds[0])
        self.span = log(cfg.nu_bounds[1]) - self.lo

    def margin(self, x) -> tuple[float, float, float]:
        mu = self.mu0 + self.sigma0 * x[0]
        sigma = self.sigma0 * np.exp(x[1])
        if self.fix_xi is None:
            xi = self.b * np.tanh(x[2])
        else:
            xi = self.fix_xi
        return float(mu), float(sigma), float(xi)

    def nu(self, r: float) -> float:
        return float(np.exp(self.lo + self.span * expit(r)))

    def to_r(self, nu: float) -> float:
        frac = (log(nu) - self.lo) / self.span
        if frac <= 0.0:
            return -_R_CLAMP
        if frac >= 1.0:
            return _R_CLAMP
        return float(np.clip(logit(frac), -_R_CLAMP, _R_CLAMP))

    def from_margin(self, mu: float, sigma: float, xi: float) -> list[float]:
        x = [(mu - self.mu0) / self.sigma0, log(sigma / self.sigma0)]
        if self.fix_xi is None:
            ratio = np.clip(xi / self.b, -1 + 1e-12, 1 - 1e-12)
            x.append(float(np.arctanh(ratio)))
        return x


def _gev_h(p, xi: float) -> np.ndarray:
    """Standard GEV quantile, ``(z**xi - 1) / xi`` with ``z = -1/log p``."""
    log_z = -np.log(-np.log(np.asarray(p, dtype=float)))
    if abs(xi) < 1e-8:
        return log_z
    return np.expm1(xi * log_z) / xi


def initial_margin(sample: CensoredSample, xi0: float = 0.1) -> GevMargin:
    """Quantile-matching starting values.

    Without censoring the median and interquartile range are matched. With
    censoring the censored fraction is matched at ``u`` and the median of the
    exceedances at the corresponding conditional median.
    """
    y = sample.values
    unc = sample.uncensored
    exc = y[unc]
    p_c = 1.0 - exc.size / y.size
    if p_c > 0 and exc.size:
        p_m = p_c + 0.5 * (1.0 - p_c)
        x_lo, x_hi = sample.u, float(np.median(exc))
        h_lo, h_hi = _gev_h([p_c, p_m], xi0)
    else:
        x_lo, x_hi = np.quantile(exc, [0.25, 0.75])
        h_lo, h_hi = _gev_h([0.25, 0.75], xi0)
    spread = x_hi - x_lo
    if not spread > 0:
        spread = max(float(np.std(exc)), 1e-6 * max(1.0, abs(float(np.mean(exc)))))
    sigma = spread / (h_hi - h_lo)
    return GevMargin(float(x_lo - sigma * h_lo), float(sigma), float(xi0))


def _feasible_start(objective, sample: CensoredSample, init: GevMargin | None, fix_xi) -> GevMargin:
    candidates = []
    if init is not None:
        candidates.append(init)
    xi_try = [fix_xi] if fix_xi is not None else [0.1, 0.0]
    for xi0 in xi_try:
        base = initial_margin(sample, xi0)
        for k in range(12):
            candidates.append(GevMargin(base.mu, base.sigma * 2.0**k, base.xi))
    for m in candidates:
        if np.isfinite(objective(m.mu, m.sigma, m.xi)):
            return m
    raise NonIdentifiableError("no feasible starting point for the margin")


class _Counter:
    def __init__(self, f):
        self.f = f
        self.n = 0

    def __call__(self, *args):
        self.n += 1
        return self.f(*args)


def _nelder_mead(fun, x0, steps, cfg: OptimizerConfig):
    """Minimise ``fun`` with scipy's Nelder-Mead plus restarts from the best point."""
    x0 = np.asarray(x0, dtype=float)
    best_x, best_f = x0, float(fun(x0))
    converged = False
    for _ in range(cfg.restarts + 1):
        simplex = np.vstack([best_x] + [best_x + s * e for s, e in zip(steps, np.eye(x0.size))])
        res = minimize(
            fun,
            best_x,
            method="Nelder-Mead",
            options={
                "initial_simplex": simplex,
                "xatol": cfg.xatol,
                "fatol": cfg.fatol,
                "maxfev": cfg.max_evals,
            },
        )
        converged = bool(res.success)
        improved = res.fun < best_f - cfg.fatol
        if res.fun <= best_f:
            best_x, best_f = res.x, float(res.fun)
        if not improved and converged:
            break
    return best_x, best_f, converged


def _neg(value: float) -> float:
    return -value if np.isfinite(value) else np.inf


def _check_sample(sample: CensoredSample, cfg: OptimizerConfig) -> None:
    k = sample.n_exceedances
    if k == 0:
        raise NonIdentifiableError("all observations are censored")
    if k < cfg.min_exceedances:
        raise NonIdentifiableError(
            f"only {k} uncensored observations; at least {cfg.min_exceedances} are required"
        )


def _fit_margin(sample, cfg, init, fix_xi):
    il = CompositeLikelihood(sample, "independent")
    start = _feasible_start(lambda mu, s, xi: il(mu, s, xi), sample, init, fix_xi)
    coords = _Coordinates(start, cfg, fix_xi)

    counted = _Counter(lambda x: _neg(il(*coords.margin(x))))
    x0 = coords.from_margin(start.mu, start.sigma, start.xi)
    steps = [0.2] * len(x0)
    x, f, ok = _nelder_mead(counted, x0, steps, cfg)
    return coords.margin(x), -f, ok, counted.n


def _golden(fun, a: float, b: float, tol: float):
    """Golden-section minimisation on ``[a, b]``; returns ``(x, f, evals)``."""
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    n = 2
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fun(d)
        n += 1
    return (c, fc, n) if fc <= fd else (d, fd, n)


def _search_nu(profile, cfg: OptimizerConfig):
    """Minimise ``profile(log nu)`` over the configured interval.

    Golden-section first; when it ends next to an end point or an end point
    does at least as well, a grid scan picks the bracket to refine.
    """
    lo, hi = log(cfg.nu_bounds[0]), log(cfg.nu_bounds[1])
    x, f, n = _golden(profile, lo, hi, cfg.golden_tol)
    f_lo, f_hi = profile(lo), profile(hi)
    n += 2
    edge = 1e-3 * (hi - lo)
    used_grid = False
    if x - lo < edge or hi - x < edge or min(f_lo, f_hi) <= f:
        used_grid = True
        grid = np.linspace(lo, hi, cfg.grid_points)
        values = np.array([profile(g) for g in grid])
        n += grid.size
        k = int(np.argmin(values))
        a, b = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
        x2, f2, n2 = _golden(profile, a, b, cfg.golden_tol)
        n += n2
        x, f = (x2, f2) if f2 <= values[k] else (grid[k], values[k])
    for cand, fc in ((lo, f_lo), (hi, f_hi)):
        if fc <= f:
            x, f = cand, fc
    return x, f, n, used_grid


def _fit_dependent(sample, spec: EstimatorSpec, cfg: OptimizerConfig, init, fix_xi, notes):
    (mu, sigma, xi), obj1, ok1, n1 = _fit_margin(sample, cfg, init, fix_xi)
    if spec.kind is EstimatorKind.MMLE:
        objective = CompositeLikelihood(sample, "markov")
    else:
        plan = build_pair_plan(sample, spec.strategy, spec.K)
        objective = CompositeLikelihood(sample, "pairwise", plan)

    profile = _Counter(lambda lnu: _neg(objective(mu, sigma, xi, float(np.exp(lnu)))))
    lnu, f2, _, used_grid = _search_nu(profile, cfg)
    if not np.isfinite(f2):
        raise NonIdentifiableError("composite likelihood is not finite at the marginal estimate")
    if used_grid:
        notes.append("nu search fell back to a grid scan")
    nu2 = float(np.exp(lnu))

    coords = _Coordinates(GevMargin(mu, sigma, xi), cfg, fix_xi)
    n_margin = 2 if fix_xi is not None else 3

    def full(x):
        return _neg(objective(*coords.margin(x[:n_margin]), coords.nu(x[n_margin])))

    counted = _Counter(full)
    x0 = coords.from_margin(mu, sigma, xi) + [coords.to_r(nu2)]
    start_value = counted(np.asarray(x0))
    x, f3, ok3 = _nelder_mead(counted, x0, [0.2] * n_margin + [0.5], cfg)
    if f3 > start_value:
        x, f3 = np.asarray(x0), start_value
    mu3, sigma3, xi3 = coords.margin(x[:n_margin])
    nu3 = coords.nu(x[n_margin])

    # flat likelihood in nu near independence: report the lower end point
    nu_lo = cfg.nu_bounds[0]
    if nu3 > nu_lo:
        at_lo = objective(mu3, sigma3, xi3, nu_lo)
        if np.isfinite(at_lo) and at_lo >= -f3 - 1e-9:
            notes.append("nu estimate pinned at the lower search bound (no detectable dependence)")
            warnings.warn("nu estimate pinned at the lower search bound", stacklevel=3)
            nu3 = nu_lo
            f3 = min(f3, -at_lo)
    elif nu3 <= nu_lo * (1 + 1e-9):
        notes.append("nu estimate pinned at the lower search bound (no detectable dependence)")
        warnings.warn("nu estimate pinned at the lower search bound", stacklevel=3)

    trace = {"stage1": obj1, "stage2": -f2, "stage3": -f3}
    theta = SmithParams(GevMargin(mu3, sigma3, xi3), nu3, sample.u)
    n_evals = n1 + profile.n + counted.n
    return theta, -f3, bool(ok1 and ok3), n_evals, trace


def fit(
    sample: CensoredSample,
    spec: EstimatorSpec | None = None,
    cfg: OptimizerConfig | None = None,
    init: GevMargin | None = None,
) -> FitResult:
    """Fit the censored Smith model with the estimator described by ``spec``."""
    spec = spec or EstimatorSpec()
    cfg = cfg or OptimizerConfig()
    _check_sample(sample, cfg)
    notes: list[str] = []
    if spec.kind is EstimatorKind.MILE:
        (mu, sigma, xi), obj, ok, n = _fit_margin(sample, cfg, init, spec.fix_xi)
        theta = SmithParams(GevMargin(mu, sigma, xi), float("nan"), sample.u)
        trace = {"stage1": obj}
    else:
        theta, obj, ok, n, trace = _fit_dependent(sample, spec, cfg, init, spec.fix_xi, notes)
    if not ok:
        notes.append("simplex search stopped before meeting its tolerances")
    return FitResult(
        theta_hat=theta,
        objective=obj,
        estimator=spec.label,
        spec=spec,
        converged=ok,
        n_evals=n,
        stage_trace=trace,
        n=sample.n,
        n_exceedances=sample.n_exceedances,
        notes=notes,
    )


def fit_mile(sample: CensoredSample, init: GevMargin | None = None, cfg: OptimizerConfig | None = None, fix_xi=None) -> FitResult:
    return fit(sample, EstimatorSpec(EstimatorKind.MILE, fix_xi=fix_xi), cfg, init)


def fit_mple(sample: CensoredSample, strategy="index", K=1, cfg: OptimizerConfig | None = None, fix_xi=None) -> FitResult:
    return fit(sample, EstimatorSpec(EstimatorKind.MPLE, strategy, K, fix_xi), cfg)


def fit_mmle(sample: CensoredSample, cfg: OptimizerConfig | None = None, fix_xi=None) -> FitResult:
    return fit(sample, EstimatorSpec(EstimatorKind.MMLE, fix_xi=fix_xi), cfg)


@dataclass
class ThresholdScan:
    thresholds: np.ndarray
    fits: list
    skipped: list

    def path(self) -> np.ndarray:
        """Rows ``(u, mu, sigma, xi, nu)`` for the thresholds that were fitted."""
        rows = [[u, *f.params] for u, f in zip(self.thresholds, self.fits) if f is not None]
        return np.array(rows).reshape(-1, 5)


def threshold_scan(
    series: TimeSeries,
    thresholds,
    spec: EstimatorSpec | None = None,
    cfg: OptimizerConfig | None = None,
) -> ThresholdScan:
    """Censor ``series`` at each threshold and fit; thin thresholds are skipped."""
    cfg = cfg or OptimizerConfig()
    thresholds = np.asarray(thresholds, dtype=float)
    if np.any(np.diff(thresholds) <= 0):
        raise ConfigError("thresholds must be strictly increasing")
    fits, skipped = [], []
    for u in thresholds:
        k = int(np.count_nonzero(series.values > u))
        if k < cfg.min_exceedances:
            skipped.append({"u": float(u), "reason": f"{k} exceedances"})
            fits.append(None)
            continue
        sample = CensoredSample(series.times, np.maximum(series.values, u), float(u), series.block_ids)
        fits.append(fit(sample, spec, cfg))
    return ThresholdScan(thresholds, fits, skipped)
