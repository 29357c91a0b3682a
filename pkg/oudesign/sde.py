import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Mapping, Optional, Tuple, Union

import numpy as np

from .exceptions import InternalConsistencyError, NumericalError, ValidationError
from .models import ParameterPartition, ParameterVector
from .utils.finite_diff import central_derivative, central_gradient

logger = logging.getLogger("oudesign")

# (t, theta values) -> coefficient values shaped like t
Coefficient = Callable[[np.ndarray, np.ndarray], np.ndarray]
# (t, theta values) -> gradients shaped t.shape + (m,)
CoefficientGradient = Callable[[np.ndarray, np.ndarray], np.ndarray]

ThetaLike = Union[ParameterVector, Mapping[str, float], np.ndarray, None]


@dataclass(frozen=True, eq=False)
class LinearSDEModel:
    """Parameterised linear SDE dX = (a(t) + b(t) X) dt + sigma(t) dW.

    Evaluators are pure functions of (t, theta). When ``closed_form`` is set
    the coefficients are constant in t and moments use exact expressions;
    otherwise they are computed by adaptive quadrature.
    """
    name: str
    partition: ParameterPartition
    theta: ParameterVector
    drift_a: Coefficient
    drift_b: Coefficient
    diffusion_sq: Coefficient
    x0: float = 0.0
    antiderivative: Optional[Coefficient] = None
    drift_a_grad: Optional[CoefficientGradient] = None
    drift_b_grad: Optional[CoefficientGradient] = None
    diffusion_sq_grad: Optional[CoefficientGradient] = None
    autonomous: bool = False
    closed_form: bool = False
    closed_form_only: bool = False
    bounds: Dict[str, Tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if self.theta.partition != self.partition:
            raise ValidationError(f"Nominal parameters of {self.name} do not match its partition")
        if self.closed_form and not self.autonomous:
            raise ValidationError(f"Closed-form moments for {self.name} need time-constant coefficients")

    def coerce(self, theta: ThetaLike = None) -> ParameterVector:
        """Resolve a parameter argument against this model's partition."""
        if theta is None:
            return self.theta
        if isinstance(theta, ParameterVector):
            if theta.partition != self.partition:
                raise ValidationError(
                    f"Parameters {list(theta.partition.names)} do not match model {self.name} "
                    f"{list(self.partition.names)}"
                )
            return theta
        if isinstance(theta, Mapping):
            return self.theta.with_values(theta)
        return ParameterVector(self.partition, theta)

    def without_closed_forms(self, keep_antiderivative: bool = True) -> "LinearSDEModel":
        """Copy whose moments go through adaptive quadrature."""
        return replace(
            self,
            closed_form=False,
            antiderivative=self.antiderivative if keep_antiderivative else None,
        )

    def initial_value(self, theta: ThetaLike = None) -> float:
        theta = self.coerce(theta)
        label = self.partition.initial_label
        if label is not None:
            return theta[label]
        return float(self.x0)

    def _evaluate(self, fn: Coefficient, what: str, t, theta: ThetaLike) -> np.ndarray:
        theta = self.coerce(theta)
        t_arr = np.asarray(t, dtype=float)
        out = np.broadcast_to(np.asarray(fn(t_arr, theta.values), dtype=float), t_arr.shape)
        if not np.all(np.isfinite(out)):
            where = t_arr[~np.isfinite(out)]
            raise NumericalError(
                f"Non-finite {what} in model {self.name} at t={where[0]}",
                details={"model": self.name, "coefficient": what},
            )
        return out

    def a(self, t, theta: ThetaLike = None) -> np.ndarray:
        return self._evaluate(self.drift_a, "a(t)", t, theta)

    def b(self, t, theta: ThetaLike = None) -> np.ndarray:
        return self._evaluate(self.drift_b, "b(t)", t, theta)

    def sigma_sq(self, t, theta: ThetaLike = None) -> np.ndarray:
        out = self._evaluate(self.diffusion_sq, "sigma^2(t)", t, theta)
        if np.any(out <= 0):
            bad = np.broadcast_to(np.asarray(t, dtype=float), out.shape)[out <= 0]
            raise NumericalError(
                f"sigma^2 must be positive; model {self.name} gives {np.min(out)} at t={bad[0]}",
                details={"model": self.name},
            )
        return out


def coefficient_partials(model: LinearSDEModel, t, theta: ThetaLike = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of a(t), b(t) and sigma^2(t) with respect to theta.

    Analytic when the model supplies gradient evaluators, central differences
    otherwise. Each result has shape t.shape + (m,).
    """
    theta = model.coerce(theta)
    t_arr = np.asarray(t, dtype=float)
    results = []
    for fn, grad, what in (
        (model.drift_a, model.drift_a_grad, "a"),
        (model.drift_b, model.drift_b_grad, "b"),
        (model.diffusion_sq, model.diffusion_sq_grad, "sigma^2"),
    ):
        if grad is not None:
            g = np.asarray(grad(t_arr, theta.values), dtype=float)
            g = np.broadcast_to(g, t_arr.shape + (model.partition.m,))
        else:
            g = central_gradient(lambda v, fn=fn: np.broadcast_to(fn(t_arr, v), t_arr.shape), theta.values)
        if not np.all(np.isfinite(g)):
            raise NumericalError(
                f"Non-finite partial derivative of {what} in model {model.name}",
                details={"model": model.name, "coefficient": what},
            )
        results.append(np.array(g))
    return results[0], results[1], results[2]


def verify_antiderivative(model: LinearSDEModel, theta: ThetaLike = None,
                          grid: Optional[np.ndarray] = None, rtol: float = 1e-6) -> float:
    """Check dB/dt = b on a time grid; returns the max relative mismatch."""
    if model.antiderivative is None:
        return 0.0
    theta = model.coerce(theta)
    grid = np.linspace(0.1, 5.0, 25) if grid is None else np.asarray(grid, dtype=float)
    anti = model.antiderivative
    derivative = central_derivative(lambda t: anti(t, theta.values), grid)
    b = model.b(grid, theta)
    mismatch = float(np.max(np.abs(derivative - b) / (1.0 + np.abs(b))))
    if mismatch > rtol:
        raise InternalConsistencyError(
            f"Antiderivative of b in model {model.name} is inconsistent (mismatch {mismatch:.3g})",
            details={"model": model.name, "mismatch": mismatch},
        )
    return mismatch
