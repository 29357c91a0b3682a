import numpy as np
import pytest

from oudesign.exceptions import NumericalError, ValidationError
from oudesign.moments import mean, variance
from oudesign.outype import (
    NonlinearSDE,
    affinity_check,
    associated_model,
    autonomous_ode_residual,
    make_nonlinear_sde,
    tabulated_sde,
    transform_phi,
)
from oudesign.registry import make_builtin_model

Y_GRID = np.linspace(0.5, 3.0, 11)


def test_phi_of_multiplicative_noise_is_log():
    sde = make_nonlinear_sde("gompertz", {"rho": 1.0, "delta": 1.0, "gamma": 1.0})
    assert transform_phi(sde, 0.0, np.e) == pytest.approx(1.0, abs=1e-8)
    np.testing.assert_allclose(transform_phi(sde, 0.0, Y_GRID), np.log(Y_GRID), atol=1e-8)


def test_phi_of_additive_noise_is_shift():
    sde = make_nonlinear_sde("linear", {"a": 0.0, "b": -1.0, "sigma": 1.0})
    assert transform_phi(sde, 0.0, 2.5, y_ref=0.5) == pytest.approx(2.0, abs=1e-10)


def test_phi_rejects_nonpositive_g():
    sde = NonlinearSDE("bad", drift=lambda t, y: 0.0 * y, g=lambda t, y: y - 1.0, sigma=lambda t: np.ones(np.shape(t)),
                       y_lo=0.0, y_ref=2.0)
    with pytest.raises(NumericalError):
        transform_phi(sde, 0.0, 0.5)


def test_gompertz_is_ou_type():
    rho, delta, gamma = 1.0, 3.0, 1.5
    sde = make_nonlinear_sde("gompertz", {"rho": rho, "delta": delta, "gamma": gamma})
    result = affinity_check(sde, [0.0, 1.0], Y_GRID)
    assert result.is_ou_type
    np.testing.assert_allclose(result.a, rho - gamma ** 2 / 2.0, atol=1e-6)
    np.testing.assert_allclose(result.b, -delta, atol=1e-6)


def test_quadratic_drift_is_not_ou_type():
    result = affinity_check(make_nonlinear_sde("quadratic", {}), [0.0], np.linspace(-2.0, 2.0, 9))
    assert not result.is_ou_type


def test_linear_sde_is_its_own_transform():
    sde = make_nonlinear_sde("linear", {"a": 0.0, "b": -1.0, "sigma": 1.0})
    result = affinity_check(sde, [0.0], np.linspace(-2.0, 2.0, 9))
    assert result.is_ou_type
    assert result.max_residual <= 1e-10
    assert result.a[0] == pytest.approx(0.0, abs=1e-10)
    assert result.b[0] == pytest.approx(-1.0, abs=1e-10)


def test_geometric_brownian_has_zero_rate():
    sde = make_nonlinear_sde("geometric_brownian", {"r": 0.3, "sigma": 0.4})
    result = affinity_check(sde, [0.0], Y_GRID)
    assert result.is_ou_type
    assert result.a[0] == pytest.approx(0.3 - 0.08, abs=1e-6)
    assert result.b[0] == pytest.approx(0.0, abs=1e-6)


def test_affinity_needs_three_states():
    sde = make_nonlinear_sde("linear", {"a": 0.0, "b": -1.0, "sigma": 1.0})
    with pytest.raises(ValidationError):
        affinity_check(sde, [0.0], [0.0, 1.0])


def test_autonomous_ode_residual_gompertz():
    sde = make_nonlinear_sde("gompertz", {"rho": 1.0, "delta": 2.0, "gamma": 1.0})
    assert autonomous_ode_residual(sde, -2.0, 1.0, Y_GRID) <= 1e-8
    wrong = autonomous_ode_residual(sde, 2.0, 1.0, Y_GRID)
    assert wrong == pytest.approx(2.0 * 2.0 * Y_GRID.max(), rel=1e-8)


def test_autonomous_ode_residual_linear():
    sde = make_nonlinear_sde("linear", {"a": 0.7, "b": -1.2, "sigma": 1.0})
    assert autonomous_ode_residual(sde, -1.2, 1.0, np.linspace(-1.0, 1.0, 7)) == pytest.approx(0.0, abs=1e-12)


def test_autonomous_ode_residual_needs_five_points():
    sde = make_nonlinear_sde("linear", {"a": 0.0, "b": -1.0, "sigma": 1.0})
    with pytest.raises(ValidationError):
        autonomous_ode_residual(sde, -1.0, 1.0, [0.0, 1.0, 2.0, 3.0])


def test_associated_model_reproduces_gompertz_moments():
    sde = make_nonlinear_sde("gompertz", {"rho": 1.0, "delta": 1.0, "gamma": 1.0})
    result = affinity_check(sde, [0.0, 0.5, 1.0], Y_GRID)
    linear = associated_model(sde, result, x0=transform_phi(sde, 0.0, 1.0))
    gompertz = make_builtin_model("gompertz_log", {"rho": 1.0, "delta": 1.0, "gamma": 1.0, "Y0": 1.0})
    t = np.array([0.5, 1.0, 2.0])
    np.testing.assert_allclose(mean(linear, None, t), mean(gompertz, None, t), atol=1e-8)
    np.testing.assert_allclose(variance(linear, None, t), variance(gompertz, None, t), atol=1e-8)


def test_associated_model_needs_ou_type():
    sde = make_nonlinear_sde("quadratic", {})
    result = affinity_check(sde, [0.0], np.linspace(-2.0, 2.0, 9))
    with pytest.raises(ValidationError):
        associated_model(sde, result, 0.0)


def test_tabulated_linear_sde():
    y = np.linspace(-2.0, 2.0, 21)
    sde = tabulated_sde(y, 0.5 - 0.8 * y, np.ones_like(y), sigma=1.0)
    result = affinity_check(sde, [0.0], np.linspace(-1.5, 1.5, 7))
    assert result.is_ou_type
    assert result.b[0] == pytest.approx(-0.8, abs=1e-8)
    assert autonomous_ode_residual(sde, -0.8, 1.0, np.linspace(-1.5, 1.5, 7)) == pytest.approx(0.0, abs=1e-8)


def test_tabulated_rejects_nonpositive_g():
    y = np.linspace(0.0, 1.0, 6)
    with pytest.raises(ValidationError):
        tabulated_sde(y, y, y - 0.5, sigma=1.0)


def test_unknown_sde():
    with pytest.raises(ValidationError):
        make_nonlinear_sde("logistic", {})
