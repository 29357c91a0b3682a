import numpy as np
import pytest

from oudesign.batch import BatchEvaluator
from oudesign.exceptions import OrderingError, SingularMatrixError, ValidationError
from oudesign.fisher import (
    counterexample_info,
    counterexample_optimal_time,
    counterexample_tmin,
    expected_conditional_fim,
    fim_exact,
    fim_markov_sum,
    fim_subvector,
    info_x0_only,
    optimal_t1_for_x0,
    x0_estimate_variance,
)
from oudesign.metrics import metrics
from oudesign.models import (
    Domain,
    InfoMatrix,
    ParameterPartition,
    ParameterRole,
    ParameterVector,
    SamplingDesign,
    SubvectorSelection,
)
from oudesign.registry import make_builtin_model
from oudesign.sde import LinearSDEModel


def _random_design(rng, domain, n):
    times = np.sort(rng.choice(np.linspace(domain.T_lo, domain.T_hi, 401), size=n, replace=False))
    return SamplingDesign(times, domain)


def _seasonal_ou():
    partition = ParameterPartition.from_pairs(
        [("theta1", ParameterRole.MEAN), ("theta2", ParameterRole.SHARED), ("theta3", ParameterRole.VOLATILITY)]
    )
    return LinearSDEModel(
        name="seasonal_ou",
        partition=partition,
        theta=ParameterVector.from_mapping(partition, {"theta1": 0.8, "theta2": 0.6, "theta3": 1.2}),
        drift_a=lambda t, v: v[0] * (1.0 + 0.5 * np.sin(t)),
        drift_b=lambda t, v: -v[1] * (1.0 + 0.3 * t),
        diffusion_sq=lambda t, v: v[2] ** 2 * (1.0 + 0.2 * t),
        x0=0.3,
    )


def test_markov_sum_equals_exact_information(domain):
    rng = np.random.default_rng(42)
    models = [
        make_builtin_model("gompertz_log", {"rho": 1.0, "delta": 1.0, "gamma": 1.0, "Y0": 1.0}),
        make_builtin_model("gompertz_log", {"rho": 3.0, "delta": 2.0, "gamma": 0.5, "Y0": 2.0}),
        make_builtin_model("brownian_drift", {"theta1": 0.7, "theta3": 1.3, "X0": 0.2}),
        make_builtin_model("mean_reversion_ou", {"theta1": 1.0, "theta2": 1.0, "theta3": 1.0, "X0": 0.5},
                           x0_parameter=True),
    ]
    for k in range(50):
        model = models[k % len(models)]
        design = _random_design(rng, domain, int(rng.integers(1, 9)))
        exact = fim_exact(model, None, design).matrix
        markov = fim_markov_sum(model, None, design).matrix
        scale = np.max(np.abs(exact))
        np.testing.assert_allclose(markov, exact, rtol=1e-6, atol=1e-9 * scale)


def test_exact_information_is_nonnegative_definite(gompertz, domain):
    info = fim_exact(gompertz, None, SamplingDesign.equidistant(domain, 6))
    assert info.is_nonnegative_definite()
    assert info.labels == ("rho", "delta", "gamma")


def test_adding_a_point_adds_information(gompertz, domain):
    small = fim_exact(gompertz, None, SamplingDesign([1.0, 1.5, 2.0], domain))
    large = fim_exact(gompertz, None, SamplingDesign([1.0, 1.25, 1.5, 2.0], domain))
    assert large.loewner_geq(small)


def test_brownian_information_is_block_diagonal(brownian, domain):
    info = fim_exact(brownian, None, SamplingDesign.equidistant(domain, 5))
    assert info.entry("theta1", "theta3") == pytest.approx(0.0, abs=1e-12)
    # Drift information of Brownian motion with drift: (t_n) / sigma^2
    assert info.entry("theta1", "theta1") == pytest.approx(2.0 / 1.3 ** 2)


def test_subvector_schur_complement(gompertz, domain):
    info = fim_exact(gompertz, None, SamplingDesign.equidistant(domain, 5))
    sel = SubvectorSelection.complete(gompertz.partition, ("rho", "delta"))
    profiled = fim_subvector(info, sel)
    full_inverse = np.linalg.inv(info.matrix)
    np.testing.assert_allclose(np.linalg.inv(profiled.matrix), full_inverse[:2, :2], rtol=1e-9)
    assert info.restrict(("rho", "delta")).loewner_geq(profiled)


def test_known_parameters_are_dropped(x0_model, domain):
    info = fim_exact(x0_model, None, SamplingDesign.equidistant(domain, 3))
    sel = SubvectorSelection.complete(x0_model.partition, ("X0",), known=("theta1", "theta2", "theta3"))
    assert fim_subvector(info, sel).entry("X0", "X0") == pytest.approx(info.entry("X0", "X0"))


def test_singular_nuisance_block():
    info = InfoMatrix(np.diag([1.0, 0.0]), ("a", "b"))
    sel = SubvectorSelection(("a",), ("b",))
    with pytest.raises(SingularMatrixError):
        fim_subvector(info, sel)
    profiled = fim_subvector(info, sel, pseudo_inverse=True)
    assert profiled.pseudo_inverse
    assert profiled.entry("a", "a") == pytest.approx(1.0)


def test_x0_only_information(x0_model):
    assert x0_estimate_variance(x0_model, None, 1.0) == pytest.approx((np.e ** 2 - 1.0) / 2.0, abs=1e-8)
    assert x0_estimate_variance(x0_model, None, 1.0) == pytest.approx(3.194528, abs=1e-6)
    assert info_x0_only(x0_model, None, 1.0) > info_x0_only(x0_model, None, 1.5)
    assert optimal_t1_for_x0(Domain(1.0, 2.0)) == 1.0


def test_x0_information_depends_only_on_first_time(x0_model, domain):
    a = fim_exact(x0_model, None, SamplingDesign([1.0, 1.4, 2.0], domain))
    b = fim_exact(x0_model, None, SamplingDesign([1.0, 1.8], domain))
    assert a.entry("X0", "X0") == pytest.approx(b.entry("X0", "X0"), rel=1e-10)
    assert a.entry("X0", "X0") == pytest.approx(info_x0_only(x0_model, None, 1.0), rel=1e-10)


def test_x0_info_needs_x0_parameter(gompertz):
    with pytest.raises(ValidationError):
        info_x0_only(gompertz, None, 1.0)


def test_conditional_information_ordering(gompertz):
    with pytest.raises(OrderingError):
        expected_conditional_fim(gompertz, None, 1.5, 1.0)
    with pytest.raises(ValidationError):
        expected_conditional_fim(gompertz, None, -0.1, 1.0)


def test_counterexample_information():
    theta2, theta3 = 2.0, 1.0
    tmin = counterexample_tmin(theta2, theta3)
    assert tmin == pytest.approx(np.log(2.0))
    at_min = counterexample_info(theta2, theta3, tmin)
    assert at_min < counterexample_info(theta2, theta3, tmin - 0.05)
    assert at_min < counterexample_info(theta2, theta3, tmin + 0.05)
    assert counterexample_optimal_time(theta2, theta3, Domain(1.0, 3.0)) == 3.0


def test_counterexample_equal_rates():
    assert counterexample_tmin(1.5, 1.5) == pytest.approx(1.0 / 1.5)
    assert counterexample_info(1.5, 1.5, 2.0) == pytest.approx(np.exp(3.0) / 2.0)


def test_counterexample_model_rejected_by_general_pipeline(domain):
    model = make_builtin_model("x0_counterexample", {"X0": 1.0, "theta2": 2.0, "theta3": 1.0})
    with pytest.raises(ValidationError):
        fim_exact(model, None, SamplingDesign([1.0, 2.0], domain))


def test_fim_evaluations_are_counted(gompertz, domain):
    fim_exact(gompertz, None, SamplingDesign([1.0, 2.0], domain))
    fim_markov_sum(gompertz, None, SamplingDesign([1.0, 2.0], domain))
    assert metrics.fim_count("exact") == 1
    assert metrics.fim_count("markov") == 1


def test_single_observation_information(gompertz, domain):
    info = fim_exact(gompertz, None, SamplingDesign([1.0], domain))
    assert info.entry("rho", "rho") == pytest.approx(0.6321206 ** 2 / 0.4323324, abs=1e-6)
    assert info.entry("rho", "rho") == pytest.approx(0.92423, abs=1e-5)


def test_conditional_information_short_lag_limit(gompertz):
    info = expected_conditional_fim(gompertz, None, 1.0, 1.0 + 1e-6)
    # 1/2 (d ln gamma^2 / d gamma)^2 at gamma = 1
    assert info.entry("gamma", "gamma") == pytest.approx(2.0, rel=1e-4)
    for label in ("rho", "delta"):
        for other in ("rho", "delta", "gamma"):
            assert abs(info.entry(label, other)) < 1e-4


@pytest.mark.parametrize("theta2, theta3", [(2.0, 1.0), (1.0, 2.0), (1.5, 1.5), (0.5, 3.0)])
def test_counterexample_information_is_convex(theta2, theta3):
    info = counterexample_info(theta2, theta3, np.linspace(0.1, 3.0, 300))
    second = info[:-2] - 2.0 * info[1:-1] + info[2:]
    assert np.all(second >= -1e-12 * np.max(info))


def test_quadrature_path_matches_closed_form(gompertz, domain):
    design = SamplingDesign.equidistant(domain, 4)
    fast = fim_exact(gompertz, None, design).matrix
    slow = fim_exact(gompertz.without_closed_forms(keep_antiderivative=False), None, design).matrix
    np.testing.assert_allclose(slow, fast, rtol=1e-4, atol=1e-6 * np.max(np.abs(fast)))


def test_time_varying_model_markov_sum_equals_exact(domain):
    model = _seasonal_ou()
    design = SamplingDesign([1.0, 1.3, 1.7, 2.0], domain)
    exact = fim_exact(model, None, design)
    markov = fim_markov_sum(model, None, design, evaluator=BatchEvaluator(max_workers=1))
    assert exact.is_nonnegative_definite()
    assert exact.entry("theta1", "theta1") > 0
    np.testing.assert_allclose(markov.matrix, exact.matrix, rtol=1e-4, atol=1e-6 * np.max(np.abs(exact.matrix)))
