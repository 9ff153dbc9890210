import warnings

import numpy as np
import pytest
from scipy import stats

from censored_smith.distributions import GevMargin
from censored_smith.errors import ConfigError, NonIdentifiableError
from censored_smith.estimation import (
    EstimatorKind,
    EstimatorSpec,
    OptimizerConfig,
    fit,
    fit_mile,
    fit_mmle,
    fit_mple,
    initial_margin,
    threshold_scan,
)
from censored_smith.likelihood import CensoredSample
from censored_smith.series import TimeSeries
from censored_smith.simulation import apply_censoring, simulate_smith

MARGIN = GevMargin(0.0, 1.0, 0.1)


def _smith_sample(n, nu, seed, q=0.7, margin=MARGIN):
    s = simulate_smith(np.arange(float(n)), margin, nu, seed)
    u = float(np.quantile(s.values, q))
    return apply_censoring(s, u), s


def test_labels():
    assert EstimatorSpec().label == "MPL1E"
    assert EstimatorSpec(EstimatorKind.MPLE, "time", 2.5).label == "MPL2.5E-time"
    assert EstimatorSpec(EstimatorKind.MILE).label == "MILE"
    assert EstimatorSpec(EstimatorKind.MMLE).label == "MMLE"
    with pytest.raises(ConfigError):
        EstimatorSpec(EstimatorKind.MPLE, "index", 0)


def test_optimizer_config_validation():
    with pytest.raises(ConfigError):
        OptimizerConfig(nu_bounds=(1.0, 0.5))
    with pytest.raises(ConfigError):
        OptimizerConfig(max_evals=0)


def test_mile_consistent_on_iid_gev():
    x = stats.genextreme.rvs(-0.2, loc=1.0, scale=2.0, size=5000, random_state=np.random.default_rng(0))
    sample = CensoredSample(np.arange(5000.0), x, -np.inf)
    res = fit_mile(sample)
    mu, sigma, xi, nu = res.params
    assert np.isnan(nu)
    assert mu == pytest.approx(1.0, abs=0.1)
    assert sigma == pytest.approx(2.0, abs=0.1)
    assert xi == pytest.approx(0.2, abs=0.05)
    assert res.converged


def test_mile_matches_scipy_on_uncensored_data():
    x = stats.genextreme.rvs(0.1, loc=0.0, scale=1.0, size=2000, random_state=np.random.default_rng(1))
    c, loc, scale = stats.genextreme.fit(x, -0.1, loc=0.0, scale=1.0)
    res = fit_mile(CensoredSample(np.arange(2000.0), x, -np.inf))
    np.testing.assert_allclose(res.params[:3], [loc, scale, -c], atol=2e-3)


def test_fully_censored_is_not_identifiable():
    sample = CensoredSample(np.arange(50.0), np.zeros(50), 0.0)
    with pytest.raises(NonIdentifiableError):
        fit_mple(sample)


def test_too_few_exceedances():
    v = np.zeros(50)
    v[:5] = np.arange(1, 6)
    with pytest.raises(NonIdentifiableError):
        fit_mile(CensoredSample(np.arange(50.0), v, 0.0))


def test_location_equivariance():
    sample, s = _smith_sample(400, 0.6, 3)
    c = 2.5
    shifted = CensoredSample(sample.times, sample.values + c, sample.u + c)
    a, b = fit_mple(sample), fit_mple(shifted)
    assert b.params[0] == pytest.approx(a.params[0] + c, abs=1e-6)
    np.testing.assert_allclose(b.params[1:], a.params[1:], atol=1e-6)


def test_stage_trace_is_monotone():
    sample, _ = _smith_sample(400, 0.6, 4)
    res = fit_mple(sample)
    assert res.stage_trace["stage3"] >= res.stage_trace["stage2"] - 1e-12
    assert res.objective == res.stage_trace["stage3"]


def test_independent_data_pin_nu_at_lower_bound():
    x = np.random.default_rng(0).gumbel(size=600)
    sample = CensoredSample(np.arange(600.0), np.maximum(x, 0.5), 0.5)
    with pytest.warns(UserWarning, match="lower search bound"):
        res = fit_mple(sample)
    assert res.params[3] == pytest.approx(1e-3)
    assert any("lower search bound" in n for n in res.notes)


def test_independent_data_usually_pinned():
    pinned = 0
    for seed in range(10):
        x = np.random.default_rng(seed).gumbel(size=600)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = fit_mple(CensoredSample(np.arange(600.0), np.maximum(x, 0.5), 0.5))
        pinned += res.params[3] == 1e-3
        assert res.params[3] < 0.5
    assert pinned >= 5


def test_dependence_range_recovered():
    sample, _ = _smith_sample(1000, 0.5, 6)
    res = fit_mple(sample)
    assert 0.2 < res.params[3] < 1.2


def test_markov_and_pairwise_agree_for_short_range():
    sample, _ = _smith_sample(1000, 0.1, 7, q=0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a, b = fit_mple(sample), fit_mmle(sample)
    np.testing.assert_allclose(a.params[:3], b.params[:3], atol=0.05)


def test_fix_xi():
    sample, _ = _smith_sample(500, 0.5, 8)
    res = fit_mple(sample, fix_xi=0.0)
    assert res.params[2] == 0.0


def test_fit_is_deterministic():
    sample, _ = _smith_sample(300, 0.5, 9)
    a, b = fit_mple(sample), fit_mple(sample)
    np.testing.assert_array_equal(a.params, b.params)
    assert a.as_dict() == b.as_dict()


def test_initial_margin_is_feasible():
    sample, _ = _smith_sample(300, 0.5, 10)
    m = initial_margin(sample)
    assert m.sigma > 0
    assert np.all(1 + m.xi * (sample.values - m.mu) / m.sigma > 0)


def test_threshold_scan_skips_thin_thresholds():
    _, s = _smith_sample(500, 0.5, 11)
    hi = float(np.sort(s.values)[-5])
    scan = threshold_scan(s, [float(np.quantile(s.values, 0.8)), hi], EstimatorSpec(EstimatorKind.MILE))
    assert scan.fits[1] is None
    assert len(scan.skipped) == 1
    assert scan.path().shape == (1, 5)


def test_threshold_scan_single_threshold_equals_direct_fit():
    _, s = _smith_sample(500, 0.5, 12)
    u = float(np.quantile(s.values, 0.75))
    scan = threshold_scan(s, [u])
    direct = fit(apply_censoring(s, u))
    np.testing.assert_array_equal(scan.fits[0].params, direct.params)


def test_threshold_scan_rejects_unsorted():
    s = TimeSeries(np.arange(20.0), np.arange(20.0))
    with pytest.raises(ConfigError):
        threshold_scan(s, [2.0, 1.0])
