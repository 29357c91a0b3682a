"""Product-structure covariance of a sampled linear SDE.

Sigma_ij = u(t_i) v(t_j) for i <= j with v = exp(B) and u = V / v, which gives an
O(n) inverse quadratic form and log-determinant through the increments of u/v.
"""
import logging
from typing import Optional, Tuple

import numpy as np

from .config import QuadratureSettings
from .exceptions import DegenerateDesignError, DesignSizeError, InternalConsistencyError
from .models import ProductCovariance, SamplingDesign
from .moments import antiderivative, antiderivative_gradient, variance, variance_gradient
from .sde import LinearSDEModel, ThetaLike
from .utils.finite_diff import central_gradient

logger = logging.getLogger("oudesign")

# Largest design handled by dense matrix operations
DENSE_CAP = 2048
# Relative tolerance on increments of u/v
RATIO_TOL = 1e-12


def _check_ratio(pc: ProductCovariance) -> None:
    ratio = pc.ratio
    if np.any(pc.v <= 0) or np.any(pc.u[pc.times > 0] <= 0):
        raise InternalConsistencyError("Product factors must be positive; sigma^2 <= 0 somewhere?")
    if pc.n > 1:
        steps = np.diff(ratio)
        floor = RATIO_TOL * float(np.max(np.abs(ratio)))
        if np.any(steps <= floor):
            i = int(np.argmax(steps <= floor))
            raise InternalConsistencyError(
                f"u/v is not strictly increasing between t={pc.times[i]} and t={pc.times[i + 1]}",
                details={"index": i, "step": float(steps[i])},
            )


def product_factors(model: LinearSDEModel, theta: ThetaLike, design: SamplingDesign,
                    quad: Optional[QuadratureSettings] = None) -> ProductCovariance:
    """Factors (u, v) of Sigma(tau) for a feasible design."""
    theta = model.coerce(theta)
    times = design.times
    v = np.exp(np.asarray(antiderivative(model, theta, times, quad), dtype=float))
    u = np.asarray(variance(model, theta, times, quad), dtype=float) / v
    pc = ProductCovariance(times, u, v)
    _check_ratio(pc)
    return pc


def product_factor_gradients(model: LinearSDEModel, theta: ThetaLike, design: SamplingDesign,
                             quad: Optional[QuadratureSettings] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Theta-gradients (du, dv), each shaped (n, m)."""
    theta = model.coerce(theta)
    times = design.times
    if model.closed_form:
        pc = product_factors(model, theta, design, quad)
        dB = antiderivative_gradient(model, theta, times, quad)
        dV = variance_gradient(model, theta, times, quad)
        dv = pc.v[:, None] * dB
        du = dV / pc.v[:, None] - pc.u[:, None] * dB
        return du, dv

    def stacked(values):
        pc = product_factors(model, theta.with_values(values), design, quad)
        return np.stack([pc.u, pc.v])

    grads = central_gradient(stacked, theta.values)
    return grads[0], grads[1]


def quad_form_inverse(pc: ProductCovariance, x: np.ndarray, y: np.ndarray):
    """x^T Sigma^{-1} y by telescoping over increments of u/v.

    x and y may be vectors of length n or (n, k) matrices; matrices give the
    k x k array of pairwise forms.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    vector = x.ndim == 1 and y.ndim == 1
    X = x.reshape(pc.n, -1)
    Y = y.reshape(pc.n, -1)
    first = pc.u[0] * pc.v[0]
    if first <= 0:
        raise DegenerateDesignError(f"Degenerate design: u1 v1 = {first} at t={pc.times[0]}")
    result = np.outer(X[0], Y[0]) / first
    if pc.n > 1:
        denom = np.diff(pc.ratio)
        if np.any(denom <= 0):
            i = int(np.argmax(denom <= 0))
            raise DegenerateDesignError(
                f"Degenerate design: u/v does not increase between t={pc.times[i]} and t={pc.times[i + 1]}",
                details={"index": i},
            )
        dX = np.diff(X / pc.v[:, None], axis=0)
        dY = np.diff(Y / pc.v[:, None], axis=0)
        result = result + dX.T @ (dY / denom[:, None])
    if vector:
        return float(result[0, 0])
    return result


def log_determinant(pc: ProductCovariance) -> float:
    """log det Sigma = log(u1 v1) + sum log(v_i^2 (u_i/v_i - u_{i-1}/v_{i-1}))."""
    first = pc.u[0] * pc.v[0]
    denom = np.diff(pc.ratio)
    if first <= 0 or np.any(denom <= 0):
        raise DegenerateDesignError("Degenerate design: covariance is not positive definite")
    return float(np.log(first) + np.sum(np.log(pc.v[1:] ** 2 * denom)))


def dense_covariance(pc: ProductCovariance) -> np.ndarray:
    """Dense Sigma from its factors."""
    if pc.n > DENSE_CAP:
        raise DesignSizeError(
            f"Design with n={pc.n} exceeds the dense cap {DENSE_CAP}; use the asymptotic module"
        )
    idx = np.arange(pc.n)
    return pc.u[np.minimum.outer(idx, idx)] * pc.v[np.maximum.outer(idx, idx)]


def dense_covariance_gradient(pc: ProductCovariance, du: np.ndarray, dv: np.ndarray) -> np.ndarray:
    """dSigma/dtheta_j stacked as (m, n, n)."""
    if pc.n > DENSE_CAP:
        raise DesignSizeError(f"Design with n={pc.n} exceeds the dense cap {DENSE_CAP}")
    idx = np.arange(pc.n)
    lo = np.minimum.outer(idx, idx)
    hi = np.maximum.outer(idx, idx)
    return np.moveaxis(du[lo] * pc.v[hi][..., None] + pc.u[lo][..., None] * dv[hi], -1, 0)


def min_eigenvalue(pc: ProductCovariance) -> float:
    """Smallest eigenvalue of the dense Sigma."""
    return float(np.linalg.eigvalsh(dense_covariance(pc))[0])
