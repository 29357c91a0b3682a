"""Moments of linear SDE solutions and their parameter gradients.

Everything is built on the affine transition X(t) | X(s) ~ N(phi X(s) + shift, var)
with phi = exp(B(t) - B(s)), shift = int_s^t exp(B(t) - B(v)) a(v) dv and
var = int_s^t exp(2 (B(t) - B(v))) sigma^2(v) dv.
"""
import logging
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .config import QuadratureSettings
from .exceptions import OrderingError, ValidationError
from .sde import LinearSDEModel, ThetaLike, coefficient_partials
from .utils.finite_diff import central_gradient
from .utils.quadrature import CumulativeIntegral, integrate

logger = logging.getLogger("oudesign")

# |b dt| below which (exp(b dt) - 1)/b switches to its series
_H_SERIES = 1e-8
_DH_SERIES = 1e-3


class Transition(NamedTuple):
    phi: np.ndarray
    shift: np.ndarray
    var: np.ndarray


def _h(b: float, dt: np.ndarray) -> np.ndarray:
    """(exp(b dt) - 1) / b, equal to dt when b = 0."""
    x = b * dt
    safe_b = b if b != 0.0 else 1.0
    series = dt * (1.0 + x / 2.0 + x * x / 6.0)
    return np.where(np.abs(x) < _H_SERIES, series, np.expm1(x) / safe_b)


def _dh_db(b: float, dt: np.ndarray) -> np.ndarray:
    """Derivative of _h with respect to b."""
    x = b * dt
    safe_b = b if b != 0.0 else 1.0
    series = dt * dt * (0.5 + x / 3.0 + x * x / 8.0 + x ** 3 / 30.0)
    with np.errstate(over="ignore", invalid="ignore"):
        direct = (x * np.exp(x) - np.expm1(x)) / (safe_b * safe_b)
    return np.where(np.abs(x) < _DH_SERIES, series, direct)


def _check_times(s: np.ndarray, t: np.ndarray) -> None:
    if np.any(s < 0) or np.any(t < 0):
        raise ValidationError("Times must be nonnegative")
    if np.any(s > t):
        raise OrderingError("Transition needs s <= t")


def _output(value: np.ndarray, like) -> np.ndarray:
    if np.ndim(like) == 0 and np.ndim(value) == 0:
        return float(value)
    return value


def _antiderivative_fn(model: LinearSDEModel, theta, quad: Optional[QuadratureSettings]):
    if model.antiderivative is not None:
        values = theta.values
        return lambda t: np.asarray(model.antiderivative(np.asarray(t, dtype=float), values), dtype=float)
    return CumulativeIntegral(lambda v: float(model.b(v, theta)), 0.0, quad, what="B(t)")


def antiderivative(model: LinearSDEModel, theta: ThetaLike, t, quad: Optional[QuadratureSettings] = None):
    """B(t) = int_0^t b(v) dv."""
    theta = model.coerce(theta)
    t_arr = np.asarray(t, dtype=float)
    return _output(np.asarray(_antiderivative_fn(model, theta, quad)(t_arr), dtype=float), t)


def antiderivative_gradient(model: LinearSDEModel, theta: ThetaLike, t,
                            quad: Optional[QuadratureSettings] = None) -> np.ndarray:
    """Gradient of B(t) with respect to theta, shaped t.shape + (m,)."""
    theta = model.coerce(theta)
    t_arr = np.asarray(t, dtype=float)
    if model.closed_form:
        _, db, _ = coefficient_partials(model, 0.0, theta)
        return t_arr[..., None] * db
    return central_gradient(
        lambda v: antiderivative(model, theta.with_values(v), t_arr, quad), theta.values
    )


def _closed_transition(model: LinearSDEModel, theta, s: np.ndarray, t: np.ndarray) -> Transition:
    a = float(model.a(0.0, theta))
    b = float(model.b(0.0, theta))
    s2 = float(model.sigma_sq(0.0, theta))
    dt = t - s
    return Transition(np.exp(b * dt), a * _h(b, dt), s2 * _h(2.0 * b, dt))


def _quadrature_transition(model: LinearSDEModel, theta, s: np.ndarray, t: np.ndarray,
                           quad: Optional[QuadratureSettings]) -> Transition:
    B = _antiderivative_fn(model, theta, quad)
    phi = np.empty(s.shape)
    shift = np.empty(s.shape)
    var = np.empty(s.shape)
    for idx in np.ndindex(s.shape):
        lo, hi = float(s[idx]), float(t[idx])
        B_hi = float(B(hi))
        phi[idx] = np.exp(B_hi - float(B(lo)))
        shift[idx] = integrate(
            lambda v: np.exp(B_hi - float(B(v))) * float(model.a(v, theta)), lo, hi, quad, "transition shift"
        )
        var[idx] = integrate(
            lambda v: np.exp(2.0 * (B_hi - float(B(v)))) * float(model.sigma_sq(v, theta)),
            lo, hi, quad, "transition variance",
        )
    return Transition(phi, shift, var)


def transition(model: LinearSDEModel, theta: ThetaLike, s, t,
               quad: Optional[QuadratureSettings] = None) -> Transition:
    """Affine transition triple (phi, shift, var) for broadcastable s <= t."""
    theta = model.coerce(theta)
    s_arr, t_arr = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
    _check_times(s_arr, t_arr)
    if model.closed_form:
        return _closed_transition(model, theta, s_arr, t_arr)
    return _quadrature_transition(model, theta, s_arr, t_arr, quad)


def transition_gradient(model: LinearSDEModel, theta: ThetaLike, s, t,
                        quad: Optional[QuadratureSettings] = None) -> Transition:
    """Theta-gradients of the transition triple, each shaped s.shape + (m,)."""
    theta = model.coerce(theta)
    s_arr, t_arr = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
    _check_times(s_arr, t_arr)
    if model.closed_form:
        a = float(model.a(0.0, theta))
        b = float(model.b(0.0, theta))
        s2 = float(model.sigma_sq(0.0, theta))
        da, db, ds2 = coefficient_partials(model, 0.0, theta)
        dt = (t_arr - s_arr)[..., None]
        phi = np.exp(b * dt)
        dphi = dt * phi * db
        dshift = _h(b, dt) * da + a * _dh_db(b, dt) * db
        dvar = _h(2.0 * b, dt) * ds2 + 2.0 * s2 * _dh_db(2.0 * b, dt) * db
        return Transition(dphi, dshift, dvar)

    def stacked(v):
        tr = _quadrature_transition(model, theta.with_values(v), s_arr, t_arr, quad)
        return np.stack([tr.phi, tr.shift, tr.var])

    grads = central_gradient(stacked, theta.values)
    return Transition(grads[0], grads[1], grads[2])


def mean(model: LinearSDEModel, theta: ThetaLike, t, quad: Optional[QuadratureSettings] = None):
    """E[X(t)]."""
    theta = model.coerce(theta)
    tr = transition(model, theta, 0.0, t, quad)
    return _output(tr.phi * model.initial_value(theta) + tr.shift, t)


def variance(model: LinearSDEModel, theta: ThetaLike, t, quad: Optional[QuadratureSettings] = None):
    """V[X(t)]; zero at t = 0."""
    return _output(transition(model, theta, 0.0, t, quad).var, t)


def covariance(model: LinearSDEModel, theta: ThetaLike, s, t, quad: Optional[QuadratureSettings] = None):
    """C[X(s), X(t)] = exp(B(t) - B(s)) V[X(s)] for s <= t; symmetric in its arguments."""
    theta = model.coerce(theta)
    s_arr, t_arr = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
    lo, hi = np.minimum(s_arr, t_arr), np.maximum(s_arr, t_arr)
    tr = transition(model, theta, lo, hi, quad)
    value = tr.phi * transition(model, theta, 0.0, lo, quad).var
    if np.ndim(s) == 0 and np.ndim(t) == 0:
        return float(value)
    return value


def conditional_moments(model: LinearSDEModel, theta: ThetaLike, s: float, t: float, x_s: float,
                        quad: Optional[QuadratureSettings] = None) -> Tuple[float, float]:
    """Mean and variance of X(t) given X(s) = x_s, for s < t."""
    if not s < t:
        raise OrderingError(f"Conditional moments need s < t, got s={s}, t={t}")
    tr = transition(model, theta, s, t, quad)
    return float(tr.phi * x_s + tr.shift), float(tr.var)


def mean_gradient(model: LinearSDEModel, theta: ThetaLike, t,
                  quad: Optional[QuadratureSettings] = None) -> np.ndarray:
    """Gradient of E[X(t)], shaped t.shape + (m,)."""
    theta = model.coerce(theta)
    t_arr = np.asarray(t, dtype=float)
    zeros = np.zeros_like(t_arr)
    tr = transition(model, theta, zeros, t_arr, quad)
    grad = transition_gradient(model, theta, zeros, t_arr, quad)
    out = grad.phi * model.initial_value(theta) + grad.shift
    label = model.partition.initial_label
    if label is not None:
        out = np.array(out)
        out[..., model.partition.index(label)] += tr.phi
    return out


def variance_gradient(model: LinearSDEModel, theta: ThetaLike, t,
                      quad: Optional[QuadratureSettings] = None) -> np.ndarray:
    """Gradient of V[X(t)], shaped t.shape + (m,)."""
    t_arr = np.asarray(t, dtype=float)
    return transition_gradient(model, theta, np.zeros_like(t_arr), t_arr, quad).var
