"""Information of the fully observed trajectory on a domain.

The limit of the design information along refining designs pinned at both
ends of the domain splits into the information of X(T_lo), a path integral,
the divergent volatility term o_term, and a bounded coupling between the
volatility parameter and the drift rate (volatility_coupling). The coupling
touches only the volatility row and column, so the blocks that enter the
ultimate efficiency of drift parameters are unaffected by it.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import QuadratureSettings
from .exceptions import ValidationError
from .fisher import require_general_model, checked_info_matrix, fim_exact
from .metrics import metrics
from .models import Domain, InfoMatrix, SamplingDesign
from .moments import mean, mean_gradient, variance, variance_gradient
from .sde import LinearSDEModel, ThetaLike, coefficient_partials
from .utils.finite_diff import step_sizes
from .utils.quadrature import integrate_vector

logger = logging.getLogger("oudesign")


@dataclass(frozen=True, eq=False)
class AsymptoticInfo:
    i_inf: InfoMatrix
    domain: Domain
    note: str
    initial_term: np.ndarray
    path_term: np.ndarray


def _log_sigma_sq_gradient(model: LinearSDEModel, theta, t) -> np.ndarray:
    _, _, ds2 = coefficient_partials(model, t, theta)
    return ds2 / np.asarray(model.sigma_sq(t, theta))[..., None]


def fim_asymptotic(model: LinearSDEModel, theta: ThetaLike, domain: Domain,
                   quad: Optional[QuadratureSettings] = None,
                   log_variance_weight: float = 0.5) -> AsymptoticInfo:
    """Trajectory information on [T_lo, T_hi].

    dE dE'/V + w dlnV dlnV' at T_lo, plus the integral of
    (df df' + db db' V) / sigma^2 with df = da + db E along the mean path.
    The Gaussian information of X(T_lo) has w = 1/2; other weights are only
    for comparing against displays that drop the factor.
    """
    require_general_model(model)
    if log_variance_weight < 0:
        raise ValidationError(f"log_variance_weight must be nonnegative, got {log_variance_weight}")
    theta = model.coerce(theta)
    T = domain.T_lo
    dE = np.asarray(mean_gradient(model, theta, T, quad))
    V = variance(model, theta, T, quad)
    dlogV = np.asarray(variance_gradient(model, theta, T, quad)) / V
    initial = np.outer(dE, dE) / V + log_variance_weight * np.outer(dlogV, dlogV)

    def integrand(t: float) -> np.ndarray:
        da, db, _ = coefficient_partials(model, t, theta)
        drift = da + db * mean(model, theta, t, quad)
        return (np.outer(drift, drift) + np.outer(db, db) * variance(model, theta, t, quad)) / float(
            model.sigma_sq(t, theta)
        )

    path = integrate_vector(integrand, domain.T_lo, domain.T_hi, quad, "trajectory information")
    info = checked_info_matrix(initial + path, model.partition.names, "asymptotic Fisher information")
    eig = info.eigenvalues()
    if not np.isfinite(eig[-1]):
        raise ValidationError("Largest eigenvalue of the asymptotic information is not finite")
    vol = model.partition.volatility_label
    metrics.track_fim("asymptotic")
    return AsymptoticInfo(
        i_inf=info,
        domain=domain,
        note=f"o_term diverges in the ({vol}, {vol}) entry under refinement",
        initial_term=initial,
        path_term=path,
    )


def o_term(model: LinearSDEModel, theta: ThetaLike, design: SamplingDesign) -> InfoMatrix:
    """1/2 sum over t_2..t_n of dln(sigma^2) dln(sigma^2)'."""
    theta = model.coerce(theta)
    m = model.partition.m
    if design.n < 2:
        return InfoMatrix(np.zeros((m, m)), model.partition.names)
    p = _log_sigma_sq_gradient(model, theta, design.times[1:])
    return checked_info_matrix(0.5 * p.T @ p, model.partition.names, "volatility term")


def volatility_coupling(model: LinearSDEModel, theta: ThetaLike, domain: Domain,
                        quad: Optional[QuadratureSettings] = None) -> InfoMatrix:
    """Bounded limit of the log-variance cross terms left after o_term.

    R = 1/2 int (p w' + w p') dt with p = dln(sigma^2) and w = db - 1/2 dp/dt.
    Not nonnegative definite in general, so it is returned unchecked.
    """
    theta = model.coerce(theta)

    def p_of(t):
        return _log_sigma_sq_gradient(model, theta, np.asarray(t, dtype=float))

    def integrand(t: float) -> np.ndarray:
        p = p_of(t)
        _, db, _ = coefficient_partials(model, t, theta)
        if model.autonomous:
            dp_dt = np.zeros_like(p)
        else:
            h = float(step_sizes(t))
            dp_dt = (p_of(t + h) - p_of(t - h)) / (2.0 * h)
        w = db - 0.5 * dp_dt
        return 0.5 * (np.outer(p, w) + np.outer(w, p))

    coupling = integrate_vector(integrand, domain.T_lo, domain.T_hi, quad, "volatility coupling")
    return InfoMatrix(0.5 * (coupling + coupling.T), model.partition.names)


def convergence_gap(model: LinearSDEModel, theta: ThetaLike, domain: Domain, n: int,
                    quad: Optional[QuadratureSettings] = None, include_coupling: bool = True,
                    asymptotic: Optional[AsymptoticInfo] = None) -> float:
    """Max-abs entry of I(tau_n) - I_inf - O(tau_n) on the equidistant n-point design.

    With include_coupling the bounded volatility coupling is also subtracted,
    so the gap vanishes as n grows.
    """
    if n < 2:
        raise ValidationError(f"Convergence gap needs n >= 2, got {n}")
    theta = model.coerce(theta)
    design = SamplingDesign.equidistant(domain, n)
    asymptotic = asymptotic or fim_asymptotic(model, theta, domain, quad)
    diff = fim_exact(model, theta, design, quad).matrix - asymptotic.i_inf.matrix
    diff = diff - o_term(model, theta, design).matrix
    if include_coupling:
        diff = diff - volatility_coupling(model, theta, domain, quad).matrix
    gap = float(np.max(np.abs(diff)))
    logger.debug(f"Convergence gap for {model.name} at n={n}: {gap:.6g}")
    return gap
