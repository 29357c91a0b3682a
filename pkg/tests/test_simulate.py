import numpy as np
import pytest
from scipy.stats import multivariate_normal

from oudesign.batch import BatchEvaluator
from oudesign.covariance import dense_covariance, product_factors
from oudesign.exceptions import ValidationError
from oudesign.hooks import HookManager
from oudesign.models import Domain, SamplingDesign, SubvectorSelection
from oudesign.moments import covariance, mean, variance
from oudesign.registry import make_builtin_model
from oudesign.simulate import (
    consistency_ladder,
    log_likelihood,
    mc_crlb_study,
    mle_fit,
    sample_path,
    sample_paths,
)


def test_sample_path_is_deterministic(gompertz, domain):
    design = SamplingDesign.equidistant(domain, 6)
    np.testing.assert_array_equal(sample_path(gompertz, None, design, 9), sample_path(gompertz, None, design, 9))
    assert not np.array_equal(sample_path(gompertz, None, design, 9), sample_path(gompertz, None, design, 10))


def test_marginal_law_at_one(gompertz):
    design = SamplingDesign([1.0], Domain(1.0, 2.0))
    draws = sample_paths(gompertz, None, design, 20000, seed=123)[:, 0]
    m, v = mean(gompertz, None, 1.0), variance(gompertz, None, 1.0)
    assert abs(draws.mean() - m) < 3.0 * np.sqrt(v / 20000)
    assert draws.var(ddof=1) == pytest.approx(v, rel=0.05)


def test_pairwise_covariance_matches_product_law(gompertz, domain):
    design = SamplingDesign([1.2, 1.8], domain)
    N = 50000
    draws = sample_paths(gompertz, None, design, N, seed=2)
    c = covariance(gompertz, None, 1.2, 1.8)
    v1, v2 = variance(gompertz, None, 1.2), variance(gompertz, None, 1.8)
    se = np.sqrt((v1 * v2 + c ** 2) / N)
    assert abs(np.cov(draws, rowvar=False)[0, 1] - c) < 3.0 * se


def test_log_likelihood_matches_dense_density(gompertz, domain):
    rng = np.random.default_rng(0)
    for n in (1, 4, 12):
        design = SamplingDesign.equidistant(domain, n) if n > 1 else SamplingDesign([1.5], domain)
        data = rng.normal(size=n)
        sigma = dense_covariance(product_factors(gompertz, None, design))
        expected = multivariate_normal(np.atleast_1d(mean(gompertz, None, design.times)), sigma).logpdf(data)
        assert log_likelihood(gompertz, None, design, data) == pytest.approx(expected, abs=1e-8)


def test_log_likelihood_length_check(gompertz, domain):
    with pytest.raises(ValidationError):
        log_likelihood(gompertz, None, SamplingDesign.equidistant(domain, 3), [0.1, 0.2])


def test_mle_fit_improves_on_truth(gompertz, domain):
    design = SamplingDesign.equidistant(domain, 10)
    data = sample_path(gompertz, None, design, 4)
    fit = mle_fit(gompertz, design, data)
    again = mle_fit(gompertz, design, data)
    np.testing.assert_array_equal(fit.theta.values, again.theta.values)
    assert fit.log_likelihood >= log_likelihood(gompertz, None, design, data) - 1e-9
    assert fit.theta["gamma"] > 0


def test_mle_fit_started_at_optimum_stays(gompertz, domain):
    design = SamplingDesign.equidistant(domain, 10)
    data = sample_path(gompertz, None, design, 4)
    fit = mle_fit(gompertz, design, data)
    refit = mle_fit(gompertz, design, data, theta_init=fit.theta)
    assert refit.log_likelihood >= fit.log_likelihood - 1e-9


def test_mle_fit_with_known_parameters(gompertz, domain):
    design = SamplingDesign.equidistant(domain, 8)
    data = sample_path(gompertz, None, design, 5)
    fit = mle_fit(gompertz, design, data, free=("rho",))
    assert fit.theta["delta"] == 1.0 and fit.theta["gamma"] == 1.0


def test_mle_fit_underdetermined(gompertz, domain):
    design = SamplingDesign.equidistant(domain, 2)
    with pytest.raises(ValidationError):
        mle_fit(gompertz, design, [0.1, 0.2])


def test_mc_study_needs_enough_replications(gompertz, domain):
    sel = SubvectorSelection.complete(gompertz.partition, ("rho", "delta"))
    with pytest.raises(ValidationError):
        mc_crlb_study(gompertz, None, SamplingDesign.equidistant(domain, 5), sel, 50, seed=1)


def test_mc_smoke_run_is_deterministic(gompertz, domain):
    sel = SubvectorSelection.complete(gompertz.partition, ("rho", "delta"))
    design = SamplingDesign.equidistant(domain, 6)
    hooks = HookManager()
    seen = []
    hooks.register("replication_completed", seen.append)
    first = mc_crlb_study(gompertz, None, design, sel, 100, seed=77, hooks=hooks)
    second = mc_crlb_study(gompertz, None, design, sel, 100, seed=77, evaluator=BatchEvaluator(max_workers=1))
    np.testing.assert_array_equal(first.covariance, second.covariance)
    assert len(seen) == 100
    assert first.labels == ("rho", "delta")
    assert first.covariance.shape == (2, 2)


@pytest.fixture(scope="module")
def small_noise_report():
    model = make_builtin_model("gompertz_log", {"rho": 1.0, "delta": 1.0, "gamma": 0.005, "Y0": 1.0})
    sel = SubvectorSelection.complete(model.partition, ("rho", "delta"))
    return mc_crlb_study(model, None, SamplingDesign.equidistant(Domain(1.0, 2.0), 10), sel, 2000, seed=2024)


@pytest.mark.slow
def test_small_noise_delta_variance_attains_information_bound(small_noise_report):
    assert 0.85 <= small_noise_report.ratio("delta") <= 1.15
    assert 0.85 <= small_noise_report.ratio("rho") <= 1.15


@pytest.mark.slow
def test_small_noise_delta_estimate_is_unbiased(small_noise_report):
    bias = small_noise_report.estimate_mean("delta") - 1.0
    assert abs(bias) <= 3.0 * small_noise_report.standard_error("delta")


@pytest.mark.slow
def test_unit_noise_short_record_is_far_from_information_bound(gompertz, domain):
    # Drift information on [1, 2] stays below the trajectory information for
    # every n, so refining the design never reaches the asymptotic regime.
    # Observed at this seed: delta ratio 15.74, rho ratio 33.6.
    sel = SubvectorSelection.complete(gompertz.partition, ("rho", "delta"))
    report = mc_crlb_study(gompertz, None, SamplingDesign.equidistant(domain, 10), sel, 2000, seed=2024)
    assert report.ratio("delta") > 5.0
    assert report.estimate_mean("delta") - 1.0 > 3.0 * report.standard_error("delta")


@pytest.mark.slow
def test_volatility_estimate_is_consistent_under_refinement(gompertz, domain):
    sel = SubvectorSelection.complete(gompertz.partition, ("gamma",))
    reports = consistency_ladder(gompertz, None, domain, [10, 40], sel, 2000, seed=99)
    assert reports[1].variance("gamma") < reports[0].variance("gamma")
