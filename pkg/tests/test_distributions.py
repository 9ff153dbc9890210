import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from censored_smith.distributions import (
    GevMargin,
    GpdMargin,
    censored_marginal_logdensity,
    from_frechet,
    gev_cdf,
    gev_logpdf,
    gev_pdf,
    gev_quantile,
    gpd_cdf,
    gpd_logpdf,
    to_frechet,
)
from censored_smith.errors import CensoringError, ParameterDomainError, TransformDomainError

# Frozen values, each computed once from an independent route (closed form by
# hand, scipy.stats.genextreme, bisection) and stored here.
GEV_CDF_1_XI03 = 0.6590
GUMBEL_Q99 = 4.600149226776579
GUMBEL_Q_7300 = 8.89556113007605


def test_cdf_at_location_is_exp_minus_one():
    for xi in (-0.4, 0.0, 0.3):
        assert gev_cdf(2.0, GevMargin(2.0, 3.0, xi)) == pytest.approx(np.exp(-1.0), rel=1e-14)


def test_cdf_closed_form_example():
    value = float(gev_cdf(1.0, GevMargin(0, 1, 0.3)))
    assert value == pytest.approx(np.exp(-(1.3 ** (-1 / 0.3))), rel=1e-14)
    assert value == pytest.approx(GEV_CDF_1_XI03, abs=5e-5)
    # independent route: scipy parametrises the shape as c = -xi
    assert value == pytest.approx(stats.genextreme.cdf(1.0, -0.3), rel=1e-12)
    # and by integrating the density
    lb = GevMargin(0, 1, 0.3).lower_bound
    mass, _ = integrate.quad(lambda x: gev_pdf(x, GevMargin(0, 1, 0.3)), lb, 1.0)
    assert mass == pytest.approx(value, abs=1e-9)


def test_cdf_clamps_outside_support():
    assert gev_cdf(-10.0, GevMargin(0, 1, 0.5)) == 0.0
    assert gev_cdf(10.0, GevMargin(0, 1, -0.5)) == 1.0


def test_logpdf_examples():
    assert gev_logpdf(0.0, GevMargin(0, 1, 0)) == pytest.approx(-1.0, rel=1e-14)
    assert gev_logpdf(3.0, GevMargin(0, 1, -0.5)) == -np.inf


@pytest.mark.parametrize("xi", [-0.3, 0.0, 0.3])
def test_pdf_integrates_to_one(xi):
    m = GevMargin(0, 1, xi)
    lo = m.lower_bound if np.isfinite(m.lower_bound) else -20
    hi = m.upper_bound if np.isfinite(m.upper_bound) else np.inf
    mass, _ = integrate.quad(lambda x: gev_pdf(x, m), lo, hi, limit=200)
    assert mass == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("xi", [-0.25, 0.0, 0.2])
def test_logpdf_matches_scipy(xi):
    x = np.linspace(-1.5, 3.0, 31)
    m = GevMargin(0.3, 1.4, xi)
    ref = stats.genextreme.logpdf(x, -xi, loc=0.3, scale=1.4)
    np.testing.assert_allclose(gev_logpdf(x, m), ref, rtol=1e-10)


def test_invalid_scale_raises():
    with pytest.raises(ParameterDomainError):
        GevMargin(0, 0.0, 0.1)
    with pytest.raises(ParameterDomainError):
        GpdMargin(0, -1.0, 0.1)


def test_quantile_examples():
    assert gev_quantile(np.exp(-1), GevMargin(1.5, 2.0, 0.2)) == pytest.approx(1.5, abs=1e-12)
    assert gev_quantile(0.99, GevMargin(0, 1, 0)) == pytest.approx(GUMBEL_Q99, rel=1e-12)
    q = gev_quantile(1 - 1 / 7300, GevMargin(0, 1, 0))
    assert q == pytest.approx(GUMBEL_Q_7300, abs=1e-6)
    assert q == pytest.approx(8.90, abs=0.005)


def test_quantile_against_bisection():
    from scipy.optimize import brentq

    m = GevMargin(0, 1, 0)
    root = brentq(lambda x: gev_cdf(x, m) - 0.99, 0, 20, xtol=1e-14)
    assert gev_quantile(0.99, m) == pytest.approx(root, abs=1e-10)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.2, 1.5])
def test_quantile_domain(p):
    with pytest.raises(ValueError):
        gev_quantile(p, GevMargin(0, 1, 0))


def test_gpd_examples():
    assert gpd_cdf(0.0, GpdMargin(0, 1, 0.3)) == 0.0
    assert gpd_cdf(1.0, GpdMargin(0, 1, 0)) == pytest.approx(1 - np.exp(-1), rel=1e-14)
    assert gpd_cdf(1.0, GpdMargin(0, 1, 0.5)) == pytest.approx(1 - 1.5**-2, rel=1e-14)
    assert gpd_logpdf(-0.1, GpdMargin(0, 1, 0.5)) == -np.inf
    x = np.linspace(0, 4, 9)
    np.testing.assert_allclose(gpd_logpdf(x, GpdMargin(0, 2, 0.2)), stats.genpareto.logpdf(x, 0.2, scale=2), rtol=1e-12)


def test_frechet_examples():
    m = GevMargin(0, 1, 0.3)
    assert to_frechet(0.0, m) == pytest.approx(1.0, rel=1e-14)
    assert from_frechet(to_frechet(2.7, m), m) == pytest.approx(2.7, rel=1e-9)
    x5 = gev_quantile(np.exp(-1 / 5), m)
    assert to_frechet(x5, m) == pytest.approx(5.0, rel=1e-12)


def test_frechet_domain_errors():
    with pytest.raises(TransformDomainError):
        to_frechet(-5.0, GevMargin(0, 1, 0.3))
    with pytest.raises(TransformDomainError):
        from_frechet(0.0, GevMargin(0, 1, 0.3))


def test_censored_marginal_examples():
    m = GevMargin(0, 1, 0)
    assert censored_marginal_logdensity(0.0, 0.0, m) == pytest.approx(-1.0)
    assert censored_marginal_logdensity(1.0, 0.0, m) == pytest.approx(float(gev_logpdf(1.0, m)))
    with pytest.raises(CensoringError):
        censored_marginal_logdensity(-0.1, 0.0, m)


@pytest.mark.parametrize("xi", [-0.2, 0.0, 0.3])
def test_censored_marginal_total_mass(xi):
    m = GevMargin(0, 1, xi)
    u = 0.4
    atom = np.exp(censored_marginal_logdensity(u, u, m))
    hi = m.upper_bound if np.isfinite(m.upper_bound) else np.inf
    tail, _ = integrate.quad(lambda y: np.exp(censored_marginal_logdensity(y, u, m)), u, hi, limit=200)
    assert atom + tail == pytest.approx(1.0, abs=1e-6)


margins = st.builds(
    GevMargin,
    st.floats(-5, 5),
    st.floats(0.1, 5),
    st.floats(-0.8, 0.8),
)


@settings(max_examples=150, deadline=None)
@given(margins, st.lists(st.floats(-20, 20), min_size=2, max_size=30))
def test_cdf_bounded_and_monotone(m, xs):
    x = np.sort(np.array(xs))
    F = gev_cdf(x, m)
    assert np.all((F >= 0) & (F <= 1))
    assert np.all(np.diff(F) >= -1e-15)


@settings(max_examples=100, deadline=None)
@given(st.floats(-3, 3), st.floats(0.2, 4), st.floats(-8, 8))
def test_gumbel_continuity(mu, sigma, x):
    a = gev_cdf(x, GevMargin(mu, sigma, 1e-9))
    b = gev_cdf(x, GevMargin(mu, sigma, 0.0))
    assert abs(a - b) < 1e-6


@settings(max_examples=150, deadline=None)
@given(margins, st.floats(1e-6, 1 - 1e-6))
def test_quantile_inverts_cdf(m, p):
    x = gev_quantile(p, m)
    assert gev_cdf(x, m) == pytest.approx(p, rel=1e-8)


@settings(max_examples=150, deadline=None)
@given(margins, st.floats(0.01, 0.99))
def test_cdf_then_quantile_is_identity(m, p):
    x = float(gev_quantile(p, m))
    assert float(gev_quantile(gev_cdf(x, m), m)) == pytest.approx(x, rel=1e-8, abs=1e-8)


@settings(max_examples=150, deadline=None)
@given(
    st.floats(-2, 2),
    st.floats(0.3, 3),
    st.floats(-0.5, 0.5),
    st.floats(0.0, 2.0),
    st.floats(0.0, 3.0),
)
def test_gpd_threshold_stability(mu, sigma_t, xi, du, excess):
    # exceedances of u > mu under GPD(mu, s, xi) are GPD(u, s + xi (u - mu), xi)
    g = GpdMargin(mu, sigma_t, xi)
    u = mu + du * sigma_t
    scale = sigma_t + xi * (u - mu)
    if scale <= 0:
        return
    y = u + excess * scale
    Gu, Gy = float(gpd_cdf(u, g)), float(gpd_cdf(y, g))
    if Gu >= 1 - 1e-12:
        return
    cond = (Gy - Gu) / (1 - Gu)
    assert cond == pytest.approx(float(gpd_cdf(y, GpdMargin(u, scale, xi))), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.floats(-2, 2), st.floats(0.3, 3), st.floats(-0.5, 0.5), st.floats(0.05, 0.95), st.floats(0.0, 3.0))
def test_gev_log_survivor_is_gpd(mu, sigma, xi, p_u, excess):
    # t(y) / t(u) is the GPD survivor with scale sigma + xi (u - mu)
    m = GevMargin(mu, sigma, xi)
    u = float(gev_quantile(p_u, m))
    scale = sigma + xi * (u - mu)
    y = u + excess * scale
    if xi < 0 and y >= m.upper_bound:
        return
    t_ratio = np.log(float(gev_cdf(y, m))) / np.log(float(gev_cdf(u, m)))
    assert 1 - t_ratio == pytest.approx(float(gpd_cdf(y, GpdMargin(u, scale, xi))), abs=1e-9)
