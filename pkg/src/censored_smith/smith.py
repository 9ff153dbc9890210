"""Bivariate law of the Gaussian extreme-value (Smith) process in time.

For two instants ``dt`` days apart the process has, on unit-Frechet
margins, the bivariate distribution ``exp(-V(z1, z2))`` with

    V = Phi(m1) / z1 + Phi(m2) / z2,
    m1 = a/2 + log(z2/z1)/a,   m2 = a/2 + log(z1/z2)/a,   a = dt / nu.

The partial derivatives used by the censored pair density are analytic:

    dV/dz1 = -Phi(m1) / z1**2,     d2V/dz1dz2 = -phi(m1) / (a z1**2 z2)

and, after composing with the GEV margin through ``dz/dx = z**2 f / F``,

    dF/dx1        = F(x1, x2) Phi(m1) f1 / F1
    d2F/dx1dx2    = F(x1, x2) [Phi(m1) Phi(m2) + z2 phi(m1) / a] f1 f2 / (F1 F2).

Everything below is evaluated from ``log t = -log z`` to keep the tails
accurate.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log, pi

import numpy as np
from scipy.special import log_ndtr, ndtr

from .distributions import (
    GevMargin,
    gev_log_t,
    gev_logpdf_from_log_t,
    gev_quantile,
    to_frechet,
)
from .errors import CensoringError, ParameterDomainError, TransformDomainError

A_INDEP = 76.0
A_DEP = 1e-12

_HALF_LOG_2PI = 0.5 * log(2.0 * pi)


@dataclass(frozen=True)
class SmithParams:
    """Margin, dependence range ``nu`` (days) and censoring threshold ``u``."""

    margin: GevMargin
    nu: float
    u: float = -np.inf

    def __post_init__(self):
        # NaN marks a fit that does not estimate nu
        if not (self.nu > 0 or np.isnan(self.nu)):
            raise ParameterDomainError(f"nu must be positive, got {self.nu}")

    @classmethod
    def from_values(cls, mu, sigma, xi, nu, u=-np.inf) -> "SmithParams":
        return cls(GevMargin(float(mu), float(sigma), float(xi)), float(nu), float(u))

    def as_dict(self) -> dict:
        return {
            "mu": self.margin.mu,
            "sigma": self.margin.sigma,
            "xi": self.margin.xi,
            "nu": self.nu,
            "u": self.u,
        }


def _arg_m(log_t1, log_t2, a):
    """Clamped ``a`` plus the two Phi arguments, using ``log(z2/z1) = log t1 - log t2``."""
    a_c = np.clip(a, A_DEP, A_INDEP)
    lr = log_t1 - log_t2
    with np.errstate(invalid="ignore"):
        m1 = 0.5 * a_c + lr / a_c
        m2 = 0.5 * a_c - lr / a_c
    return a_c, m1, m2


def _exponent_from_log_t(log_t1, log_t2, a):
    t1 = np.exp(log_t1)
    t2 = np.exp(log_t2)
    _, m1, m2 = _arg_m(log_t1, log_t2, a)
    v = t1 * ndtr(m1) + t2 * ndtr(m2)
    v = np.where(a >= A_INDEP, t1 + t2, v)
    return np.where(a <= A_DEP, np.maximum(t1, t2), v)


def exponent_V(z1, z2, dt, nu):
    """Exponent function ``V(z1, z2)`` of the Smith process at lag ``dt``."""
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    dt = np.asarray(dt, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if np.any(~(z1 > 0)) or np.any(~(z2 > 0)):
        raise ParameterDomainError("Frechet arguments must be positive")
    if np.any(~(nu > 0)):
        raise ParameterDomainError("nu must be positive")
    if np.any(dt < 0):
        raise ParameterDomainError("time lag must be non-negative")
    return _exponent_from_log_t(-np.log(z1), -np.log(z2), dt / nu)


def bivariate_cdf_frechet(z1, z2, dt, nu):
    return np.exp(-exponent_V(z1, z2, dt, nu))


def bivariate_cdf_gev(x1, x2, dt, p: SmithParams):
    z1 = to_frechet(x1, p.margin)
    z2 = to_frechet(x2, p.margin)
    return bivariate_cdf_frechet(z1, z2, dt, p.nu)


def pair_logdensity_core(log_t1, log_t2, logf1, logf2, unc1, unc2, a):
    """Censored pair log-density from per-observation margin terms.

    ``log_t`` must already hold ``log t(u)`` for censored observations and
    ``logf`` is ignored where ``unc`` is false. Works on arrays of pairs.
    """
    a_c, m1, m2 = _arg_m(log_t1, log_t2, a)
    indep = a >= A_INDEP
    dep = a <= A_DEP
    t1 = np.exp(log_t1)
    t2 = np.exp(log_t2)
    v = t1 * ndtr(m1) + t2 * ndtr(m2)
    v = np.where(indep, t1 + t2, np.where(dep, np.maximum(t1, t2), v))

    lp1 = np.where(indep, 0.0, log_ndtr(m1))
    lp2 = np.where(indep, 0.0, log_ndtr(m2))
    # log(Phi(m1) Phi(m2) + z2 phi(m1) / a)
    with np.errstate(divide="ignore"):
        cross = -log_t2 - 0.5 * m1 * m1 - _HALF_LOG_2PI - np.log(a_c)
    both = np.where(indep, 0.0, np.logaddexp(lp1 + lp2, cross))

    # f / F on each side: log f - log F = log f + t
    g1 = np.where(unc1, logf1 + t1, 0.0)
    g2 = np.where(unc2, logf2 + t2, 0.0)
    term = np.where(
        unc1 & unc2,
        both,
        np.where(unc1, lp1, np.where(unc2, lp2, 0.0)),
    )
    out = -v + term + g1 + g2
    return np.where(np.isnan(out), -np.inf, out)


def _prepare(y, u, margin: GevMargin):
    y = np.asarray(y, dtype=float)
    if np.any(y < u):
        raise CensoringError("observations below the censoring threshold")
    unc = y > u
    x = np.where(unc, y, u)
    log_t = gev_log_t(x, margin.mu, margin.sigma, margin.xi)
    logf = np.where(unc, gev_logpdf_from_log_t(log_t, margin.sigma, margin.xi), 0.0)
    return log_t, logf, unc


def censored_pair_logdensity(y1, y2, dt, p: SmithParams):
    """Log-density of a censored pair w.r.t. ``(delta_u + dx) x (delta_u + dx)``.

    Four cases: both at ``u`` gives ``log F(u, u)``; one above ``u`` gives the
    log of the corresponding first partial; both above gives the log of the
    mixed second partial.
    """
    dt = np.asarray(dt, dtype=float)
    if np.any(dt < 0):
        raise ParameterDomainError("time lag must be non-negative")
    lt1, lf1, unc1 = _prepare(y1, p.u, p.margin)
    lt2, lf2, unc2 = _prepare(y2, p.u, p.margin)
    bad = ~np.isfinite(lt1) | ~np.isfinite(lt2)
    with np.errstate(invalid="ignore", over="ignore"):
        out = pair_logdensity_core(lt1, lt2, lf1, lf2, unc1, unc2, dt / p.nu)
    return np.where(bad, -np.inf, out)


def cdf_partials(x1, x2, dt, p: SmithParams):
    """Analytic ``(F, dF/dx1, dF/dx2, d2F/dx1dx2)`` of the bivariate GEV-margin cdf."""
    m = p.margin
    lt1 = gev_log_t(x1, m.mu, m.sigma, m.xi)
    lt2 = gev_log_t(x2, m.mu, m.sigma, m.xi)
    if np.any(~np.isfinite(lt1)) or np.any(~np.isfinite(lt2)):
        raise TransformDomainError("value at or outside the support of the margin")
    a = np.asarray(dt, dtype=float) / p.nu
    a_c, m1, m2 = _arg_m(lt1, lt2, a)
    cdf = np.exp(-_exponent_from_log_t(lt1, lt2, a))
    r1 = np.exp(gev_logpdf_from_log_t(lt1, m.sigma, m.xi) + np.exp(lt1))
    r2 = np.exp(gev_logpdf_from_log_t(lt2, m.sigma, m.xi) + np.exp(lt2))
    phi1 = np.where(a >= A_INDEP, 1.0, ndtr(m1))
    phi2 = np.where(a >= A_INDEP, 1.0, ndtr(m2))
    dens = np.where(a >= A_INDEP, 0.0, np.exp(-0.5 * m1 * m1 - _HALF_LOG_2PI - lt2) / a_c)
    d1 = cdf * phi1 * r1
    d2 = cdf * phi2 * r2
    d12 = cdf * (phi1 * phi2 + dens) * r1 * r2
    return cdf, d1, d2, d12


def default_grad_grid(p: SmithParams):
    """Pairs at the 30/60/85/97% margin quantiles and lags ``a`` in {1, 2, 4}."""
    qs = gev_quantile(np.array([0.3, 0.6, 0.85, 0.97]), p.margin)
    dts = np.array([1.0, 2.0, 4.0]) * p.nu
    y1, y2, dt = np.meshgrid(qs, qs, dts, indexing="ij")
    return y1.ravel(), y2.ravel(), dt.ravel()


def _central_differences(F, y1, y2, h):
    d1 = (F(y1 + h, y2) - F(y1 - h, y2)) / (2 * h)
    d2 = (F(y1, y2 + h) - F(y1, y2 - h)) / (2 * h)
    d12 = (F(y1 + h, y2 + h) - F(y1 + h, y2 - h) - F(y1 - h, y2 + h) + F(y1 - h, y2 - h)) / (
        4 * h * h
    )
    return d1, d2, d12


def pair_density_grad_check(p: SmithParams, grid=None, rel_step: float = 1e-3) -> float:
    """Largest relative gap between analytic partials and finite differences.

    Central differences of :func:`bivariate_cdf_gev` with steps ``h`` and
    ``2h`` (``h = rel_step * sigma``) are Richardson-combined.
    """
    if grid is None:
        grid = default_grad_grid(p)
    y1, y2, dt = (np.asarray(g, dtype=float) for g in grid)
    h = rel_step * p.margin.sigma
    _, a1, a2, a12 = cdf_partials(y1, y2, dt, p)

    def F(x1, x2):
        return bivariate_cdf_gev(x1, x2, dt, p)

    fine = _central_differences(F, y1, y2, h)
    coarse = _central_differences(F, y1, y2, 2 * h)
    worst = 0.0
    for exact, f, c in zip((a1, a2, a12), fine, coarse):
        approx = (4.0 * f - c) / 3.0
        worst = max(worst, float(np.max(np.abs(approx - exact) / np.abs(exact))))
    return worst
