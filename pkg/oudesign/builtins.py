"""Builtin linear SDE models.

Each factory takes a label -> value mapping and returns a LinearSDEModel with
analytic coefficient gradients. All but the counterexample have coefficients
constant in time, so their moments are available in closed form.
"""
import math
from typing import Callable, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from .exceptions import ValidationError
from .models import ParameterPartition, ParameterRole, ParameterVector
from .sde import LinearSDEModel

INF = float("inf")
POSITIVE = (1e-10, INF)
FREE = (-INF, INF)


def require_params(name: str, params: Mapping[str, float], required: Sequence[str],
                   optional: Sequence[str] = ()) -> Dict[str, float]:
    unknown = sorted(set(params) - set(required) - set(optional))
    if unknown:
        raise ValidationError(f"Unknown parameter(s) {unknown} for model {name}")
    values = {}
    for label in required:
        if label not in params:
            raise ValidationError(f"Missing parameter '{label}' for model {name}")
    for label, raw in params.items():
        try:
            value = float(raw)
        except (TypeError, ValueError):
            raise ValidationError(f"Parameter '{label}' must be a number, got {raw!r}")
        if not math.isfinite(value):
            raise ValidationError(f"Parameter '{label}' must be finite")
        values[label] = value
    return values


def _positive(values: Mapping[str, float], *labels: str) -> None:
    for label in labels:
        if values[label] <= 0:
            raise ValidationError(f"{label} must be positive")


def _constant(value_fn: Callable[[np.ndarray], float]):
    return lambda t, v: np.full(np.shape(t), value_fn(v))


def _constant_grad(grad_fn: Callable[[np.ndarray], np.ndarray]):
    return lambda t, v: np.broadcast_to(grad_fn(v), np.shape(t) + (len(v),)).copy()


def constant_coefficient_model(
    name: str,
    pairs: Sequence[Tuple[str, ParameterRole]],
    values: Mapping[str, float],
    a: Callable[[np.ndarray], float],
    b: Callable[[np.ndarray], float],
    sigma_sq: Callable[[np.ndarray], float],
    da: Callable[[np.ndarray], np.ndarray],
    db: Callable[[np.ndarray], np.ndarray],
    dsigma_sq: Callable[[np.ndarray], np.ndarray],
    x0: float = 0.0,
    bounds: Optional[Dict[str, Tuple[float, float]]] = None,
) -> LinearSDEModel:
    """Assemble a time-homogeneous model from scalar coefficient maps of theta."""
    partition = ParameterPartition.from_pairs(pairs)
    theta = ParameterVector.from_mapping(partition, values)
    return LinearSDEModel(
        name=name,
        partition=partition,
        theta=theta,
        drift_a=_constant(a),
        drift_b=_constant(b),
        diffusion_sq=_constant(sigma_sq),
        x0=x0,
        antiderivative=lambda t, v: b(v) * np.asarray(t, dtype=float),
        drift_a_grad=_constant_grad(da),
        drift_b_grad=_constant_grad(db),
        diffusion_sq_grad=_constant_grad(dsigma_sq),
        autonomous=True,
        closed_form=True,
        bounds={label: (bounds or {}).get(label, FREE) for label in partition.names},
    )


def _with_initial(pairs, x0_parameter: bool):
    if x0_parameter:
        return [("X0", ParameterRole.INITIAL)] + list(pairs)
    return list(pairs)


def _unit(m: int, j: int, scale: float = 1.0) -> np.ndarray:
    e = np.zeros(m)
    e[j] = scale
    return e


def gompertz_log(params: Mapping[str, float], x0_parameter: bool = False) -> LinearSDEModel:
    """Log-scale Gompertz growth: a = rho - gamma^2/2, b = -delta, sigma = gamma, X0 = ln Y0."""
    values = require_params("gompertz_log", params, ("rho", "delta", "gamma", "Y0"))
    _positive(values, "Y0", "delta", "gamma")
    x0 = math.log(values["Y0"])
    pairs = _with_initial(
        [("rho", ParameterRole.MEAN), ("delta", ParameterRole.SHARED), ("gamma", ParameterRole.VOLATILITY)],
        x0_parameter,
    )
    labels = [p[0] for p in pairs]
    m = len(labels)
    i_rho, i_delta, i_gamma = labels.index("rho"), labels.index("delta"), labels.index("gamma")
    theta_values = {"rho": values["rho"], "delta": values["delta"], "gamma": values["gamma"], "X0": x0}

    def da(v):
        g = _unit(m, i_rho)
        g[i_gamma] = -v[i_gamma]
        return g

    return constant_coefficient_model(
        "gompertz_log",
        pairs,
        theta_values,
        a=lambda v: v[i_rho] - 0.5 * v[i_gamma] ** 2,
        b=lambda v: -v[i_delta],
        sigma_sq=lambda v: v[i_gamma] ** 2,
        da=da,
        db=lambda v: _unit(m, i_delta, -1.0),
        dsigma_sq=lambda v: _unit(m, i_gamma, 2.0 * v[i_gamma]),
        x0=x0,
        bounds={"delta": POSITIVE, "gamma": POSITIVE},
    )


def mean_reversion_ou(params: Mapping[str, float], x0_parameter: bool = False) -> LinearSDEModel:
    """dX = theta2 (theta1 - X) dt + theta3 dW."""
    values = require_params("mean_reversion_ou", params, ("theta1", "theta2", "theta3"), ("X0",))
    _positive(values, "theta3")
    x0 = values.get("X0", 0.0)
    pairs = _with_initial(
        [("theta1", ParameterRole.MEAN), ("theta2", ParameterRole.SHARED), ("theta3", ParameterRole.VOLATILITY)],
        x0_parameter,
    )
    labels = [p[0] for p in pairs]
    m = len(labels)
    i1, i2, i3 = labels.index("theta1"), labels.index("theta2"), labels.index("theta3")

    def da(v):
        g = np.zeros(m)
        g[i1] = v[i2]
        g[i2] = v[i1]
        return g

    return constant_coefficient_model(
        "mean_reversion_ou",
        pairs,
        dict(values, X0=x0),
        a=lambda v: v[i1] * v[i2],
        b=lambda v: -v[i2],
        sigma_sq=lambda v: v[i3] ** 2,
        da=da,
        db=lambda v: _unit(m, i2, -1.0),
        dsigma_sq=lambda v: _unit(m, i3, 2.0 * v[i3]),
        x0=x0,
        bounds={"theta3": POSITIVE},
    )


def brownian_drift(params: Mapping[str, float], x0_parameter: bool = False) -> LinearSDEModel:
    """dX = theta1 dt + theta3 dW."""
    values = require_params("brownian_drift", params, ("theta1", "theta3"), ("X0",))
    _positive(values, "theta3")
    x0 = values.get("X0", 0.0)
    pairs = _with_initial([("theta1", ParameterRole.MEAN), ("theta3", ParameterRole.VOLATILITY)], x0_parameter)
    labels = [p[0] for p in pairs]
    m = len(labels)
    i1, i3 = labels.index("theta1"), labels.index("theta3")
    return constant_coefficient_model(
        "brownian_drift",
        pairs,
        dict(values, X0=x0),
        a=lambda v: v[i1],
        b=lambda v: 0.0,
        sigma_sq=lambda v: v[i3] ** 2,
        da=lambda v: _unit(m, i1),
        db=lambda v: np.zeros(m),
        dsigma_sq=lambda v: _unit(m, i3, 2.0 * v[i3]),
        x0=x0,
        bounds={"theta3": POSITIVE},
    )


def linear_constant(params: Mapping[str, float], x0_parameter: bool = False) -> LinearSDEModel:
    """dX = (a + b X) dt + sigma dW with the coefficients themselves as parameters."""
    values = require_params("linear_constant", params, ("a", "b", "sigma"), ("X0",))
    _positive(values, "sigma")
    x0 = values.get("X0", 0.0)
    pairs = _with_initial(
        [("a", ParameterRole.MEAN), ("b", ParameterRole.SHARED), ("sigma", ParameterRole.VOLATILITY)],
        x0_parameter,
    )
    labels = [p[0] for p in pairs]
    m = len(labels)
    ia, ib, isig = labels.index("a"), labels.index("b"), labels.index("sigma")
    return constant_coefficient_model(
        "linear_constant",
        pairs,
        dict(values, X0=x0),
        a=lambda v: v[ia],
        b=lambda v: v[ib],
        sigma_sq=lambda v: v[isig] ** 2,
        da=lambda v: _unit(m, ia),
        db=lambda v: _unit(m, ib),
        dsigma_sq=lambda v: _unit(m, isig, 2.0 * v[isig]),
        x0=x0,
        bounds={"sigma": POSITIVE},
    )


def x0_counterexample(params: Mapping[str, float], x0_parameter: bool = True) -> LinearSDEModel:
    """dX = theta2/2 (X0 - X) dt + exp(-theta3 t / 2) dW with X0 unknown.

    The initial value enters the drift, so the model is served by
    counterexample_info rather than the general information pipeline.
    """
    values = require_params("x0_counterexample", params, ("X0", "theta2", "theta3"))
    _positive(values, "theta2", "theta3")
    partition = ParameterPartition.from_pairs(
        [("X0", ParameterRole.INITIAL), ("theta2", ParameterRole.SHARED), ("theta3", ParameterRole.VOLATILITY)]
    )
    theta = ParameterVector.from_mapping(partition, values)

    def diffusion_sq_grad(t, v):
        t = np.asarray(t, dtype=float)
        g = np.zeros(t.shape + (3,))
        g[..., 2] = -t * np.exp(-v[2] * t)
        return g

    def drift_a_grad(t, v):
        g = np.zeros(np.shape(t) + (3,))
        g[..., 0] = 0.5 * v[1]
        g[..., 1] = 0.5 * v[0]
        return g

    return LinearSDEModel(
        name="x0_counterexample",
        partition=partition,
        theta=theta,
        drift_a=lambda t, v: np.full(np.shape(t), 0.5 * v[1] * v[0]),
        drift_b=lambda t, v: np.full(np.shape(t), -0.5 * v[1]),
        diffusion_sq=lambda t, v: np.exp(-v[2] * np.asarray(t, dtype=float)),
        x0=values["X0"],
        antiderivative=lambda t, v: -0.5 * v[1] * np.asarray(t, dtype=float),
        drift_a_grad=drift_a_grad,
        drift_b_grad=lambda t, v: np.broadcast_to(np.array([0.0, -0.5, 0.0]), np.shape(t) + (3,)).copy(),
        diffusion_sq_grad=diffusion_sq_grad,
        autonomous=False,
        closed_form=False,
        closed_form_only=True,
        bounds={"X0": FREE, "theta2": POSITIVE, "theta3": POSITIVE},
    )


BUILTIN_FACTORIES = {
    "gompertz_log": gompertz_log,
    "mean_reversion_ou": mean_reversion_ou,
    "brownian_drift": brownian_drift,
    "x0_counterexample": x0_counterexample,
    "linear_constant": linear_constant,
}
