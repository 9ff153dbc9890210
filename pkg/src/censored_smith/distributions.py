"""GEV and GPD distribution functions and the unit-Frechet marginal transform.

All functions are vectorised over ``x``. Densities return ``-inf`` outside
the support (so that optimisers see a rejected step) while distribution
functions clamp to 0 or 1.

The GEV is parametrised as

    F(x) = exp(-t(x)),  t(x) = (1 + xi (x - mu) / sigma) ** (-1 / xi)

with the Gumbel limit ``t(x) = exp(-(x - mu) / sigma)`` used when
``|xi| < XI_SWITCH``. Internally most quantities are computed from
``log t``, which is also ``-log z`` for the unit-Frechet transform
``z = -1 / log F``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CensoringError, ParameterDomainError, TransformDomainError

XI_SWITCH = 1e-8


@dataclass(frozen=True)
class GevMargin:
    mu: float
    sigma: float
    xi: float

    def __post_init__(self):
        if not (self.sigma > 0 and np.isfinite(self.sigma)):
            raise ParameterDomainError(f"GEV scale must be positive, got {self.sigma}")
        if not (np.isfinite(self.mu) and np.isfinite(self.xi)):
            raise ParameterDomainError("GEV location and shape must be finite")

    @property
    def lower_bound(self) -> float:
        return self.mu - self.sigma / self.xi if self.xi > XI_SWITCH else -np.inf

    @property
    def upper_bound(self) -> float:
        return self.mu - self.sigma / self.xi if self.xi < -XI_SWITCH else np.inf


@dataclass(frozen=True)
class GpdMargin:
    """Generalised Pareto margin above ``mu_threshold``."""

    mu_threshold: float
    sigma: float
    xi: float

    def __post_init__(self):
        if not (self.sigma > 0 and np.isfinite(self.sigma)):
            raise ParameterDomainError(f"GPD scale must be positive, got {self.sigma}")


def _check(m) -> None:
    if not m.sigma > 0:
        raise ParameterDomainError(f"scale must be positive, got {m.sigma}")


def gev_log_t(x, mu: float, sigma: float, xi: float) -> np.ndarray:
    """``log t(x)``; ``+inf`` below the lower bound, ``-inf`` above the upper bound."""
    w = (np.asarray(x, dtype=float) - mu) / sigma
    if abs(xi) < XI_SWITCH:
        return -w
    arg = xi * w
    with np.errstate(invalid="ignore", divide="ignore"):
        out = -np.log1p(arg) / xi
    outside = ~(arg > -1.0)
    if np.any(outside):
        out = np.where(outside, np.inf if xi > 0 else -np.inf, out)
    return out


def gev_logpdf_from_log_t(log_t: np.ndarray, sigma: float, xi: float) -> np.ndarray:
    with np.errstate(invalid="ignore", over="ignore"):
        out = -np.log(sigma) + (1.0 + xi) * log_t - np.exp(log_t)
    return np.where(np.isfinite(log_t), out, -np.inf)


def gev_cdf(x, m: GevMargin) -> np.ndarray:
    _check(m)
    with np.errstate(over="ignore"):
        return np.exp(-np.exp(gev_log_t(x, m.mu, m.sigma, m.xi)))


def gev_logcdf(x, m: GevMargin) -> np.ndarray:
    _check(m)
    with np.errstate(over="ignore"):
        return -np.exp(gev_log_t(x, m.mu, m.sigma, m.xi))


def gev_logpdf(x, m: GevMargin) -> np.ndarray:
    _check(m)
    return gev_logpdf_from_log_t(gev_log_t(x, m.mu, m.sigma, m.xi), m.sigma, m.xi)


def gev_pdf(x, m: GevMargin) -> np.ndarray:
    return np.exp(gev_logpdf(x, m))


def gev_quantile(p, m: GevMargin) -> np.ndarray:
    """Closed-form inverse of :func:`gev_cdf`."""
    _check(m)
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0) & (p < 1))):
        raise ValueError("probabilities must lie strictly inside (0, 1)")
    return from_frechet(-1.0 / np.log(p), m)


def gpd_cdf(x, g: GpdMargin) -> np.ndarray:
    _check(g)
    w = (np.asarray(x, dtype=float) - g.mu_threshold) / g.sigma
    w = np.maximum(w, 0.0)
    if abs(g.xi) < XI_SWITCH:
        return -np.expm1(-w)
    arg = g.xi * w
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -np.expm1(-np.log1p(arg) / g.xi)
    return np.clip(np.where(arg <= -1.0, 1.0, out), 0.0, 1.0)


def gpd_logpdf(x, g: GpdMargin) -> np.ndarray:
    _check(g)
    w = (np.asarray(x, dtype=float) - g.mu_threshold) / g.sigma
    if abs(g.xi) < XI_SWITCH:
        out = -np.log(g.sigma) - w
        return np.where(w >= 0, out, -np.inf)
    arg = 1.0 + g.xi * w
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -np.log(g.sigma) - (1.0 + 1.0 / g.xi) * np.log(arg)
    return np.where((w >= 0) & (arg > 0), out, -np.inf)


def to_frechet(x, m: GevMargin) -> np.ndarray:
    """Map GEV-distributed values onto the unit-Frechet scale, ``z = -1/log F(x)``."""
    _check(m)
    log_t = gev_log_t(x, m.mu, m.sigma, m.xi)
    if np.any(~np.isfinite(log_t)):
        raise TransformDomainError("value at or outside the support of the margin")
    return np.exp(-log_t)


def from_frechet(z, m: GevMargin) -> np.ndarray:
    """Inverse of :func:`to_frechet`: ``mu + sigma (z**xi - 1) / xi``."""
    _check(m)
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 0)):
        raise TransformDomainError("unit-Frechet values must be positive")
    log_z = np.log(z)
    if abs(m.xi) < XI_SWITCH:
        return m.mu + m.sigma * log_z
    return m.mu + m.sigma * np.expm1(m.xi * log_z) / m.xi


def censored_marginal_logdensity(y, u: float, m: GevMargin) -> np.ndarray:
    """Log-density of ``max(X, u)`` w.r.t. the measure ``delta_u + Lebesgue``.

    Censored values (``y == u``) carry the atom ``log F(u)``; values above
    ``u`` carry the GEV log-density.
    """
    y = np.asarray(y, dtype=float)
    if np.any(y < u):
        raise CensoringError("observations below the censoring threshold")
    at_u = y == u
    log_atom = gev_logcdf(u, m) if np.isfinite(u) else -np.inf
    return np.where(at_u, log_atom, gev_logpdf(y, m))
