"""Ornstein-Uhlenbeck type checks for nonlinear SDEs.

A nonlinear SDE dY = mu(t, Y) dt + sigma(t) g(t, Y) dW is of OU type when the
transform phi(t, y) = int dy / g(t, y) turns it into a linear SDE. By Ito's
lemma X = phi(t, Y) has drift

    drift_X = dphi/dt + mu / g - 1/2 sigma^2 dg/dy

and unit-scaled diffusion sigma(t), so membership is the affinity of drift_X
in phi on every time slice.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .batch import BatchEvaluator
from .builtins import require_params
from .config import QuadratureSettings
from .exceptions import NumericalError, ValidationError
from .registry import make_builtin_model
from .sde import LinearSDEModel
from .utils.finite_diff import central_derivative, step_sizes
from .utils.quadrature import integrate

logger = logging.getLogger("oudesign")

# Relative residual bound for certifying affinity
AFFINITY_RTOL = 1e-6
# Relative spread below which fitted coefficients count as constant in t
CONSTANT_RTOL = 1e-8

# (t, y) -> values shaped like the broadcast of t and y
SpaceTimeFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class NonlinearSDE:
    """dY = mu(t, Y) dt + sigma(t) g(t, Y) dW on the open interval (y_lo, y_hi)."""
    name: str
    drift: SpaceTimeFunction
    g: SpaceTimeFunction
    sigma: Callable[[np.ndarray], np.ndarray]
    y_lo: float = -np.inf
    y_hi: float = np.inf
    y_ref: float = 0.0
    autonomous: bool = True
    drift_dy: Optional[SpaceTimeFunction] = None
    g_dy: Optional[SpaceTimeFunction] = None
    g_dyy: Optional[SpaceTimeFunction] = None

    def __post_init__(self):
        if not self.y_lo < self.y_hi:
            raise ValidationError(f"SDE {self.name} needs y_lo < y_hi")
        if not self.y_lo < self.y_ref < self.y_hi:
            raise ValidationError(f"Reference point {self.y_ref} of {self.name} is outside ({self.y_lo}, {self.y_hi})")

    def check_states(self, y) -> None:
        y = np.asarray(y, dtype=float)
        if np.any(y <= self.y_lo) or np.any(y >= self.y_hi):
            raise ValidationError(f"States must lie in ({self.y_lo}, {self.y_hi}) for {self.name}")

    def g_values(self, t, y) -> np.ndarray:
        out = np.broadcast_to(np.asarray(self.g(t, y), dtype=float), np.broadcast(t, y).shape)
        if not np.all(np.isfinite(out)) or np.any(out <= 0):
            raise NumericalError(f"g must be positive and finite on the state grid of {self.name}")
        return out


@dataclass(frozen=True, eq=False)
class AffinityResult:
    is_ou_type: bool
    t: np.ndarray
    a: np.ndarray
    b: np.ndarray
    max_residual: float
    tolerance: float

    def to_rows(self) -> List[List[float]]:
        return [[float(t), float(a), float(b)] for t, a, b in zip(self.t, self.a, self.b)]


def transform_phi(sde: NonlinearSDE, t: float, y, y_ref: Optional[float] = None,
                  quad: Optional[QuadratureSettings] = None):
    """phi(t, y) = int_{y_ref}^{y} dz / g(t, z)."""
    y_ref = sde.y_ref if y_ref is None else float(y_ref)
    y_arr = np.asarray(y, dtype=float)
    sde.check_states(y_arr)
    sde.check_states(y_ref)

    def inverse_g(z: float) -> float:
        value = float(sde.g_values(t, z))
        return 1.0 / value

    out = np.array([integrate(inverse_g, y_ref, float(v), quad, "phi(t, y)") for v in y_arr.reshape(-1)])
    out = out.reshape(y_arr.shape)
    return float(out) if np.ndim(y) == 0 else out


def _dg_dy(sde: NonlinearSDE, t: float, y: np.ndarray) -> np.ndarray:
    if sde.g_dy is not None:
        return np.broadcast_to(np.asarray(sde.g_dy(t, y), dtype=float), y.shape)
    return central_derivative(lambda z: sde.g_values(t, z), y)


def _transformed_drift(sde: NonlinearSDE, t: float, y: np.ndarray, quad: Optional[QuadratureSettings]):
    phi = transform_phi(sde, t, y, quad=quad)
    if sde.autonomous:
        dphi_dt = np.zeros_like(y)
    else:
        h = float(step_sizes(t))
        dphi_dt = (transform_phi(sde, t + h, y, quad=quad) - transform_phi(sde, t - h, y, quad=quad)) / (2.0 * h)
    sigma_sq = float(np.asarray(sde.sigma(np.asarray(t, dtype=float)))) ** 2
    mu = np.broadcast_to(np.asarray(sde.drift(t, y), dtype=float), y.shape)
    drift_x = dphi_dt + mu / sde.g_values(t, y) - 0.5 * sigma_sq * _dg_dy(sde, t, y)
    if not np.all(np.isfinite(drift_x)):
        raise NumericalError(f"Non-finite transformed drift for {sde.name} at t={t}")
    return phi, drift_x


def affinity_check(sde: NonlinearSDE, t_grid: Sequence[float], y_grid: Sequence[float],
                   quad: Optional[QuadratureSettings] = None,
                   evaluator: Optional[BatchEvaluator] = None) -> AffinityResult:
    """Least-squares fit drift_X = a(t) + b(t) phi per time slice, with max-norm residual."""
    t_grid = np.asarray(t_grid, dtype=float).reshape(-1)
    y_grid = np.asarray(y_grid, dtype=float).reshape(-1)
    if y_grid.size < 3:
        raise ValidationError(f"Affinity check needs at least 3 states, got {y_grid.size}")
    if t_grid.size < 1:
        raise ValidationError("Affinity check needs at least one time")
    sde.check_states(y_grid)

    def fit(t: float):
        phi, drift_x = _transformed_drift(sde, float(t), y_grid, quad)
        if np.ptp(phi) <= 1e-12 * (1.0 + np.max(np.abs(phi))):
            raise ValidationError(f"phi is constant over the state grid at t={t}; cannot fit b(t)")
        design = np.column_stack([np.ones_like(phi), phi])
        coef = np.linalg.lstsq(design, drift_x, rcond=None)[0]
        residual = float(np.max(np.abs(drift_x - design @ coef)))
        return coef[0], coef[1], residual, float(np.max(np.abs(drift_x)))

    fits = (evaluator or BatchEvaluator()).map(fit, t_grid.tolist())
    a = np.array([f[0] for f in fits])
    b = np.array([f[1] for f in fits])
    max_residual = max(f[2] for f in fits)
    tolerance = AFFINITY_RTOL * (1.0 + max(f[3] for f in fits))
    result = AffinityResult(max_residual <= tolerance, t_grid, a, b, max_residual, tolerance)
    logger.info(f"Affinity check for {sde.name}: OU type {result.is_ou_type}, residual {max_residual:.3g}")
    return result


def autonomous_ode_residual(sde: NonlinearSDE, b: float, sigma: float, y_grid: Sequence[float]) -> float:
    """Max-abs residual of mu g' + (b - mu') g + 1/2 sigma^2 g^2 g'' on the grid.

    Derivatives are analytic when the SDE supplies them, second-order finite
    differences on the grid otherwise.
    """
    if not sde.autonomous:
        raise ValidationError(f"SDE {sde.name} is not autonomous")
    y = np.asarray(y_grid, dtype=float).reshape(-1)
    if y.size < 5:
        raise ValidationError(f"Need at least 5 grid points for second differences, got {y.size}")
    if np.any(np.diff(y) <= 0):
        raise ValidationError("State grid must be strictly increasing")
    sde.check_states(y)
    mu = np.broadcast_to(np.asarray(sde.drift(0.0, y), dtype=float), y.shape)
    g = sde.g_values(0.0, y)
    mu_y = sde.drift_dy(0.0, y) if sde.drift_dy is not None else np.gradient(mu, y, edge_order=2)
    g_y = sde.g_dy(0.0, y) if sde.g_dy is not None else np.gradient(g, y, edge_order=2)
    if sde.g_dyy is not None:
        g_yy = sde.g_dyy(0.0, y)
    else:
        g_yy = np.gradient(np.broadcast_to(g_y, y.shape), y, edge_order=2)
    residual = mu * g_y + (b - mu_y) * g + 0.5 * sigma ** 2 * g ** 2 * g_yy
    return float(np.max(np.abs(residual)))


def associated_model(sde: NonlinearSDE, result: AffinityResult, x0: float) -> LinearSDEModel:
    """Linear model of X = phi(Y) for a certified SDE with time-constant coefficients.

    x0 is the initial value on the transformed scale.
    """
    if not result.is_ou_type:
        raise ValidationError(f"SDE {sde.name} is not of OU type (residual {result.max_residual:.3g})")
    sigma = np.abs(np.asarray(sde.sigma(result.t), dtype=float)) * np.ones_like(result.t)
    for label, values in (("a", result.a), ("b", result.b), ("sigma", sigma)):
        if np.ptp(values) > CONSTANT_RTOL * (1.0 + np.max(np.abs(values))):
            raise ValidationError(f"Coefficient {label} of {sde.name} varies in t; only constant coefficients map to a linear model")
    return make_builtin_model(
        "linear_constant",
        {"a": float(np.mean(result.a)), "b": float(np.mean(result.b)), "sigma": float(sigma[0]), "X0": x0},
    )


def _constant_in_t(value: float):
    return lambda t: np.full(np.shape(t), value)


def gompertz_sde(params: Mapping[str, float]) -> NonlinearSDE:
    """dY = (rho Y - delta Y ln Y) dt + gamma Y dW on y > 0."""
    v = require_params("gompertz", params, ("rho", "delta", "gamma"))
    rho, delta, gamma = v["rho"], v["delta"], v["gamma"]
    return NonlinearSDE(
        name="gompertz",
        drift=lambda t, y: rho * y - delta * y * np.log(y),
        g=lambda t, y: np.asarray(y, dtype=float),
        sigma=_constant_in_t(gamma),
        y_lo=0.0,
        y_ref=1.0,
        drift_dy=lambda t, y: rho - delta * np.log(y) - delta,
        g_dy=lambda t, y: np.ones_like(np.asarray(y, dtype=float)),
        g_dyy=lambda t, y: np.zeros_like(np.asarray(y, dtype=float)),
    )


def linear_sde(params: Mapping[str, float]) -> NonlinearSDE:
    """dY = (a + b Y) dt + sigma dW."""
    v = require_params("linear", params, ("a", "b", "sigma"))
    a, b, sigma = v["a"], v["b"], v["sigma"]
    return NonlinearSDE(
        name="linear",
        drift=lambda t, y: a + b * y,
        g=lambda t, y: np.ones_like(np.asarray(y, dtype=float)),
        sigma=_constant_in_t(sigma),
        drift_dy=lambda t, y: np.full(np.shape(y), b),
        g_dy=lambda t, y: np.zeros_like(np.asarray(y, dtype=float)),
        g_dyy=lambda t, y: np.zeros_like(np.asarray(y, dtype=float)),
    )


def quadratic_sde(params: Mapping[str, float]) -> NonlinearSDE:
    """dY = Y^2 dt + sigma dW, which is not of OU type."""
    v = require_params("quadratic", params, (), ("sigma",))
    sigma = v.get("sigma", 1.0)
    return NonlinearSDE(
        name="quadratic",
        drift=lambda t, y: np.asarray(y, dtype=float) ** 2,
        g=lambda t, y: np.ones_like(np.asarray(y, dtype=float)),
        sigma=_constant_in_t(sigma),
        drift_dy=lambda t, y: 2.0 * np.asarray(y, dtype=float),
        g_dy=lambda t, y: np.zeros_like(np.asarray(y, dtype=float)),
        g_dyy=lambda t, y: np.zeros_like(np.asarray(y, dtype=float)),
    )


def geometric_brownian_sde(params: Mapping[str, float]) -> NonlinearSDE:
    """dY = r Y dt + sigma Y dW on y > 0."""
    v = require_params("geometric_brownian", params, ("r", "sigma"))
    r, sigma = v["r"], v["sigma"]
    return NonlinearSDE(
        name="geometric_brownian",
        drift=lambda t, y: r * np.asarray(y, dtype=float),
        g=lambda t, y: np.asarray(y, dtype=float),
        sigma=_constant_in_t(sigma),
        y_lo=0.0,
        y_ref=1.0,
        drift_dy=lambda t, y: np.full(np.shape(y), r),
        g_dy=lambda t, y: np.ones_like(np.asarray(y, dtype=float)),
        g_dyy=lambda t, y: np.zeros_like(np.asarray(y, dtype=float)),
    )


def tabulated_sde(y: Sequence[float], mu: Sequence[float], g: Sequence[float], sigma: float,
                  y_ref: Optional[float] = None, name: str = "tabulated") -> NonlinearSDE:
    """Autonomous SDE from tabulated (y, mu, g) columns, interpolated by cubic splines."""
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    g = np.asarray(g, dtype=float)
    if not (y.ndim == mu.ndim == g.ndim == 1) or not (y.size == mu.size == g.size):
        raise ValidationError("Tabulated columns y, mu and g must be 1-d and of equal length")
    if y.size < 5:
        raise ValidationError(f"Tabulated SDE needs at least 5 rows, got {y.size}")
    if np.any(np.diff(y) <= 0):
        raise ValidationError("Tabulated y column must be strictly increasing")
    if np.any(g <= 0):
        raise ValidationError("Tabulated g must be positive")
    if sigma <= 0:
        raise ValidationError("sigma must be positive")
    mu_spline = CubicSpline(y, mu)
    g_spline = CubicSpline(y, g)
    span = y[-1] - y[0]
    # States strictly inside the table so the open-interval checks accept the grid ends.
    y_lo, y_hi = y[0] - 1e-9 * span, y[-1] + 1e-9 * span
    ref = float(y[y.size // 2]) if y_ref is None else float(y_ref)
    return NonlinearSDE(
        name=name,
        drift=lambda t, z: mu_spline(np.clip(z, y[0], y[-1])),
        g=lambda t, z: g_spline(np.clip(z, y[0], y[-1])),
        sigma=_constant_in_t(float(sigma)),
        y_lo=y_lo,
        y_hi=y_hi,
        y_ref=ref,
        drift_dy=lambda t, z: mu_spline(z, 1),
        g_dy=lambda t, z: g_spline(z, 1),
        g_dyy=lambda t, z: g_spline(z, 2),
    )


SDE_FACTORIES: Dict[str, Callable[[Mapping[str, float]], NonlinearSDE]] = {
    "gompertz": gompertz_sde,
    "linear": linear_sde,
    "quadratic": quadratic_sde,
    "geometric_brownian": geometric_brownian_sde,
}


def make_nonlinear_sde(name: str, params: Mapping[str, float]) -> NonlinearSDE:
    if name not in SDE_FACTORIES:
        raise ValidationError(f"Unknown SDE '{name}'; available: {sorted(SDE_FACTORIES)}")
    return SDE_FACTORIES[name](params)
