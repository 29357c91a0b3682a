import pytest

from oudesign.metrics import metrics
from oudesign.models import Domain
from oudesign.registry import make_builtin_model


@pytest.fixture(autouse=True)
def clear_metrics_registry():
    """Start every test from fresh Prometheus collectors."""
    metrics.reset()
    yield


@pytest.fixture
def domain():
    return Domain(1.0, 2.0)


@pytest.fixture
def gompertz():
    return make_builtin_model("gompertz_log", {"rho": 1.0, "delta": 1.0, "gamma": 1.0, "Y0": 1.0})


@pytest.fixture
def brownian():
    return make_builtin_model("brownian_drift", {"theta1": 0.7, "theta3": 1.3, "X0": 0.2})


@pytest.fixture
def x0_model():
    """b = -1, sigma = 1 with X0 as the only parameter of interest."""
    return make_builtin_model(
        "mean_reversion_ou", {"theta1": 0.0, "theta2": 1.0, "theta3": 1.0, "X0": 1.0}, x0_parameter=True
    )
