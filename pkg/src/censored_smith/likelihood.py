"""Composite log-likelihoods of a censored Smith process sample.

Three objectives are provided: the independence likelihood (margins only),
the pairwise likelihood over a pair plan, and the Markovian likelihood
(consecutive pairs divided by the interior margins). Observations in
different blocks never form a pair.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .distributions import gev_log_t, gev_logpdf_from_log_t
from .errors import CensoringError, ConfigError, DataError
from .smith import SmithParams, pair_logdensity_core


class PairStrategy(str, Enum):
    INDEX = "index"
    TIME = "time"


@dataclass
class CensoredSample:
    """Censored observations ``max(X_t, u)`` with optional block labels.

    Times are in days and must increase within each block. Tied time stamps
    within a block are dropped (first kept) with a warning.
    """

    times: np.ndarray
    values: np.ndarray
    u: float
    block_ids: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape or self.times.ndim != 1:
            raise DataError("times and values must be 1-d arrays of equal length")
        if np.any(~np.isfinite(self.values)) or np.any(~np.isfinite(self.times)):
            raise DataError("times and values must be finite")
        if np.any(self.values < self.u):
            raise CensoringError("values below the censoring threshold")
        if self.block_ids is None:
            blocks = np.zeros(self.times.size, dtype=np.int64)
        else:
            blocks = np.asarray(self.block_ids, dtype=np.int64)
            if blocks.shape != self.times.shape:
                raise DataError("block_ids must match times")
        same = blocks[1:] == blocks[:-1]
        if np.any(np.diff(blocks) < 0):
            raise DataError("observations must be grouped by non-decreasing block id")
        step = np.diff(self.times)
        if np.any(same & (step < 0)):
            raise DataError("times must increase within each block")
        tied = np.concatenate([[False], same & (step == 0)])
        if np.any(tied):
            warnings.warn(f"dropping {int(tied.sum())} observations with tied time stamps")
            keep = ~tied
            self.times = self.times[keep]
            self.values = self.values[keep]
            blocks = blocks[keep]
        self.block_ids = blocks

    @property
    def n(self) -> int:
        return self.times.size

    @property
    def uncensored(self) -> np.ndarray:
        return self.values > self.u

    @property
    def n_exceedances(self) -> int:
        return int(np.count_nonzero(self.uncensored))

    def block_slices(self) -> list[slice]:
        edges = np.flatnonzero(np.diff(self.block_ids)) + 1
        bounds = np.concatenate([[0], edges, [self.n]])
        return [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]


@dataclass
class PairWeightPlan:
    """Index pairs ``(i, j)``, ``i < j``, retained in the pairwise likelihood."""

    i: np.ndarray
    j: np.ndarray
    strategy: PairStrategy
    K: float
    dt: np.ndarray = field(repr=False, default=None)

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.i.tolist(), self.j.tolist()))

    def __len__(self) -> int:
        return self.i.size


def build_pair_plan(sample: CensoredSample, strategy="index", K=1) -> PairWeightPlan:
    """Pairs within ``K`` observations (index window) or ``K`` days (time window)."""
    strategy = PairStrategy(strategy)
    if strategy is PairStrategy.INDEX:
        if int(K) != K or K < 1:
            raise ConfigError("index window K must be an integer >= 1")
        K = int(K)
    elif not K > 0:
        raise ConfigError("time window K must be positive")

    ii, jj = [], []
    for sl in sample.block_slices():
        start, stop = sl.start, sl.stop
        m = stop - start
        idx = np.arange(start, stop)
        if strategy is PairStrategy.INDEX:
            for lag in range(1, min(K, m - 1) + 1):
                ii.append(idx[:-lag])
                jj.append(idx[lag:])
        else:
            t = sample.times[sl]
            reach = np.searchsorted(t, t + K, side="right") - np.arange(m) - 1
            for lag in range(1, int(reach.max(initial=0)) + 1):
                ok = reach[:-lag] >= lag if lag < m else np.zeros(0, dtype=bool)
                ii.append(idx[:-lag][ok])
                jj.append(idx[lag:][ok])
    i = np.concatenate(ii) if ii else np.zeros(0, dtype=np.int64)
    j = np.concatenate(jj) if jj else np.zeros(0, dtype=np.int64)
    order = np.lexsort((j, i))
    i, j = i[order].astype(np.int64), j[order].astype(np.int64)
    return PairWeightPlan(i, j, strategy, K, dt=sample.times[j] - sample.times[i])


class CompositeLikelihood:
    """Pre-indexed objective evaluator used inside the optimisers.

    ``kind`` is one of ``"independent"``, ``"pairwise"`` or ``"markov"``.
    Evaluations take raw ``(mu, sigma, xi, nu)`` floats and return ``-inf``
    whenever the parameters leave the support of the data.

    Censored observations all share the same margin terms, so pairs with
    both members censored are grouped by time lag and evaluated once per
    distinct lag.
    """

    def __init__(self, sample: CensoredSample, kind: str = "pairwise", plan: PairWeightPlan | None = None):
        self.sample = sample
        self.kind = kind
        n = sample.n
        weights = np.ones(n)
        if kind == "markov":
            plan = build_pair_plan(sample, "index", 1)
            weights = np.zeros(n)
            for sl in sample.block_slices():
                if sl.stop - sl.start == 1:
                    weights[sl.start] = 1.0
                else:
                    weights[sl.start + 1 : sl.stop - 1] = -1.0
        elif kind == "pairwise":
            if plan is None:
                plan = build_pair_plan(sample, "index", 1)
            weights = np.zeros(n)
        elif kind != "independent":
            raise ConfigError(f"unknown likelihood kind {kind!r}")
        self.plan = plan
        self.marginal_weights = weights
        self.uses_nu = kind != "independent"

        unc = sample.uncensored
        self._unc_idx = np.flatnonzero(unc)
        self._x_unc = sample.values[unc]
        self._w_unc = weights[unc]
        self._w_cens = float(weights[~unc].sum())
        self._has_cens = bool(np.any(~unc))
        self._unc = unc

        if plan is not None and len(plan):
            dt = plan.dt if plan.dt is not None else sample.times[plan.j] - sample.times[plan.i]
            cc = ~unc[plan.i] & ~unc[plan.j]
            self._cc_dt, self._cc_count = np.unique(dt[cc], return_counts=True)
            self._pi = plan.i[~cc]
            self._pj = plan.j[~cc]
            self._dt = dt[~cc]
        else:
            self._cc_dt = np.zeros(0)
            self._cc_count = np.zeros(0, dtype=np.int64)
            self._pi = self._pj = np.zeros(0, dtype=np.int64)
            self._dt = np.zeros(0)

    def __call__(self, mu: float, sigma: float, xi: float, nu: float = 1.0) -> float:
        if not (sigma > 0 and nu > 0):
            return -np.inf
        sample = self.sample
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            lt_unc = gev_log_t(self._x_unc, mu, sigma, xi)
            lf_unc = gev_logpdf_from_log_t(lt_unc, sigma, xi)
            if np.any(~np.isfinite(lt_unc)) or np.any(~np.isfinite(lf_unc)):
                return -np.inf
            lt_u = 0.0
            if self._has_cens:
                lt_u = float(gev_log_t(sample.u, mu, sigma, xi))
                if not np.isfinite(lt_u):
                    return -np.inf

            total = float(np.dot(self._w_unc, lf_unc))
            if self._has_cens and self._w_cens != 0.0:
                total -= self._w_cens * np.exp(lt_u)

            if self.kind != "independent":
                log_t = np.full(sample.n, lt_u)
                log_t[self._unc_idx] = lt_unc
                logf = np.zeros(sample.n)
                logf[self._unc_idx] = lf_unc
                i, j, unc = self._pi, self._pj, self._unc
                pair = pair_logdensity_core(
                    log_t[i], log_t[j], logf[i], logf[j], unc[i], unc[j], self._dt / nu
                )
                total += float(np.sum(pair))
                if self._cc_dt.size:
                    cc = pair_logdensity_core(
                        lt_u, lt_u, 0.0, 0.0, False, False, self._cc_dt / nu
                    )
                    total += float(np.dot(self._cc_count, cc))
        return total if np.isfinite(total) else -np.inf


def _theta_args(theta: SmithParams, sample: CensoredSample):
    if theta.u != sample.u:
        raise DataError("theta and sample use different censoring thresholds")
    m = theta.margin
    return m.mu, m.sigma, m.xi, theta.nu


def independent_loglik(theta: SmithParams, sample: CensoredSample) -> float:
    return CompositeLikelihood(sample, "independent")(*_theta_args(theta, sample))


def pairwise_loglik(theta: SmithParams, sample: CensoredSample, plan: PairWeightPlan) -> float:
    return CompositeLikelihood(sample, "pairwise", plan)(*_theta_args(theta, sample))


def markov_loglik(theta: SmithParams, sample: CensoredSample) -> float:
    return CompositeLikelihood(sample, "markov")(*_theta_args(theta, sample))
