from dataclasses import replace

import numpy as np
import pytest

from oudesign.builtins import BUILTIN_FACTORIES
from oudesign.exceptions import InternalConsistencyError, NumericalError, ValidationError
from oudesign.registry import ModelRegistry, make_builtin_model
from oudesign.sde import coefficient_partials, verify_antiderivative

PARAMETER_RANGES = {
    "gompertz_log": {"rho": (0.2, 3.0), "delta": (0.2, 3.0), "gamma": (0.2, 3.0), "Y0": (0.5, 2.0)},
    "mean_reversion_ou": {"theta1": (-1.0, 1.0), "theta2": (0.2, 3.0), "theta3": (0.2, 3.0)},
    "brownian_drift": {"theta1": (-1.0, 1.0), "theta3": (0.2, 3.0)},
    "linear_constant": {"a": (-1.0, 1.0), "b": (-2.0, 1.0), "sigma": (0.2, 3.0)},
    "x0_counterexample": {"X0": (-1.0, 1.0), "theta2": (0.2, 3.0), "theta3": (0.2, 3.0)},
}


def test_gompertz_coefficients(gompertz):
    assert gompertz.a(1.0) == pytest.approx(0.5)
    assert gompertz.b(1.0) == pytest.approx(-1.0)
    assert gompertz.sigma_sq(1.0) == pytest.approx(1.0)
    assert gompertz.initial_value() == 0.0


def test_gompertz_initial_value_is_log_y0():
    model = make_builtin_model("gompertz_log", {"rho": 1.0, "delta": 1.0, "gamma": 1.0, "Y0": np.e})
    assert model.initial_value() == pytest.approx(1.0)


def test_missing_parameter_is_named():
    with pytest.raises(ValidationError, match="Missing parameter 'rho' for model gompertz_log"):
        make_builtin_model("gompertz_log", {"delta": 1.0, "gamma": 1.0, "Y0": 1.0})


def test_nonpositive_delta_rejected():
    with pytest.raises(ValidationError, match="delta must be positive"):
        make_builtin_model("gompertz_log", {"rho": 1.0, "delta": 0.0, "gamma": 1.0, "Y0": 1.0})


def test_unknown_model():
    with pytest.raises(ValidationError, match="Unknown model"):
        make_builtin_model("logistic", {})


def test_x0_toggle_adds_initial_parameter():
    model = make_builtin_model("brownian_drift", {"theta1": 1.0, "theta3": 1.0, "X0": 2.0}, x0_parameter=True)
    assert model.partition.names[0] == "X0"
    assert model.partition.initial_label == "X0"
    assert model.initial_value() == 2.0


def test_analytic_partials_match_finite_differences(gompertz):
    t = np.array([0.5, 1.0, 1.5])
    analytic = coefficient_partials(gompertz, t)
    numeric = coefficient_partials(replace(gompertz, drift_a_grad=None, drift_b_grad=None, diffusion_sq_grad=None), t)
    for a, n in zip(analytic, numeric):
        np.testing.assert_allclose(a, n, atol=1e-8)


def test_analytic_partials_match_finite_differences_for_every_builtin():
    assert set(PARAMETER_RANGES) == set(BUILTIN_FACTORIES)
    rng = np.random.default_rng(17)
    for name, ranges in PARAMETER_RANGES.items():
        for _ in range(20):
            model = make_builtin_model(name, {label: rng.uniform(*r) for label, r in ranges.items()})
            numeric_model = replace(model, drift_a_grad=None, drift_b_grad=None, diffusion_sq_grad=None)
            t = rng.uniform(0.1, 3.0)
            for a, n in zip(coefficient_partials(model, t), coefficient_partials(numeric_model, t)):
                np.testing.assert_allclose(a, n, rtol=1e-6, atol=1e-7)


def test_wrong_antiderivative_detected(gompertz):
    broken = replace(gompertz, antiderivative=lambda t, v: 2.0 * v[1] * np.asarray(t))
    with pytest.raises(InternalConsistencyError):
        verify_antiderivative(broken)


def test_counterexample_sigma_sq_depends_on_time():
    model = make_builtin_model("x0_counterexample", {"X0": 1.0, "theta2": 2.0, "theta3": 1.0})
    assert model.sigma_sq(2.0) == pytest.approx(np.exp(-2.0))
    assert model.closed_form_only


def test_nonpositive_diffusion_raises(gompertz):
    broken = replace(gompertz, diffusion_sq=lambda t, v: np.zeros(np.shape(t)))
    with pytest.raises(NumericalError):
        broken.sigma_sq(1.0)


def test_registry_accepts_custom_factory(gompertz):
    reg = ModelRegistry()
    reg.register("my_gompertz", lambda params, x0_parameter=False: gompertz)
    assert "my_gompertz" in reg.names()
    assert "gompertz_log" in reg.names()
    assert reg.create("my_gompertz", {}) is gompertz
