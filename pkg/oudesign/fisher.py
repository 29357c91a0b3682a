"""Fisher information of sampled linear SDEs.

fim_exact evaluates the Gaussian information of the whole sample: a mean term
through the O(n) inverse quadratic form and a trace term through a Cholesky
factor of the dense covariance. fim_markov_sum rebuilds the same matrix as a
sum of expected transition informations and serves as its cross-check.
"""
import logging
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .batch import BatchEvaluator, sequential
from .config import QuadratureSettings
from .covariance import (
    DENSE_CAP,
    dense_covariance,
    dense_covariance_gradient,
    product_factor_gradients,
    product_factors,
    quad_form_inverse,
)
from .exceptions import (
    DegenerateDesignError,
    DesignSizeError,
    InternalConsistencyError,
    NumericalError,
    OrderingError,
    SingularMatrixError,
    ValidationError,
)
from .metrics import metrics
from .models import Domain, InfoMatrix, SamplingDesign, SubvectorSelection
from .moments import antiderivative, mean, mean_gradient, transition, transition_gradient, variance
from .sde import LinearSDEModel, ThetaLike

logger = logging.getLogger("oudesign")

# Eigenvalue tolerance for nonnegative definiteness
NND_TOL = 1e-9
# Nuisance blocks with eigenvalue ratio below this count as singular
SINGULAR_RTOL = 1e-12


def require_general_model(model: LinearSDEModel) -> None:
    """Reject models whose initial value enters the drift."""
    if model.closed_form_only:
        raise ValidationError(
            f"Model {model.name} has its initial value in the drift; use counterexample_info instead"
        )


def checked_info_matrix(matrix: np.ndarray, labels, what: str) -> InfoMatrix:
    """Symmetrise and wrap a computed information matrix, rejecting non-finite or indefinite results."""
    if not np.all(np.isfinite(matrix)):
        raise NumericalError(f"Non-finite entries in {what}")
    matrix = 0.5 * (matrix + matrix.T)
    eig = np.linalg.eigvalsh(matrix)
    if eig[0] < -NND_TOL * max(1.0, abs(eig[-1])):
        raise InternalConsistencyError(
            f"{what} is not nonnegative definite (smallest eigenvalue {eig[0]:.3g})",
            details={"eigenvalues": eig.tolist()},
        )
    return InfoMatrix(matrix, labels)


def fim_exact(model: LinearSDEModel, theta: ThetaLike, design: SamplingDesign,
              quad: Optional[QuadratureSettings] = None) -> InfoMatrix:
    """Information of X(tau) ~ N(E, Sigma): dE' Sigma^-1 dE + 1/2 tr(Sigma^-1 dSigma Sigma^-1 dSigma)."""
    require_general_model(model)
    theta = model.coerce(theta)
    if design.n > DENSE_CAP:
        raise DesignSizeError(
            f"Design with n={design.n} exceeds the dense cap {DENSE_CAP}; use fim_asymptotic for dense sampling"
        )
    n, m = design.n, model.partition.m
    pc = product_factors(model, theta, design, quad)
    J = np.asarray(mean_gradient(model, theta, design.times, quad)).reshape(n, m)
    mean_term = np.atleast_2d(quad_form_inverse(pc, J, J))

    du, dv = product_factor_gradients(model, theta, design, quad)
    sigma = dense_covariance(pc)
    dsigma = dense_covariance_gradient(pc, du, dv)
    try:
        factor = cho_factor(sigma, lower=True)
    except LinAlgError as e:
        raise DegenerateDesignError(f"Covariance of the design is not positive definite: {str(e)}") from e
    stacked = np.transpose(dsigma, (1, 0, 2)).reshape(n, m * n)
    W = np.transpose(cho_solve(factor, stacked).reshape(n, m, n), (1, 0, 2))
    trace_term = 0.5 * np.einsum("iab,jba->ij", W, W)

    metrics.track_fim("exact")
    return checked_info_matrix(mean_term + trace_term, model.partition.names, "exact Fisher information")


def schur_cross_term(fim: InfoMatrix, sel: SubvectorSelection, pseudo_inverse: bool = False):
    """I_{I,II} I_{II,II}^{-1} I_{II,I}; returns (matrix, used_pseudo_inverse)."""
    sel.validate(fim.labels)
    k = len(sel.kept)
    if not sel.nuisance:
        return np.zeros((k, k)), False
    cross = fim.block(sel.kept, sel.nuisance)
    nuisance = fim.block(sel.nuisance, sel.nuisance)
    eig = np.linalg.eigvalsh(nuisance)
    if eig[-1] <= 0 or eig[0] <= SINGULAR_RTOL * eig[-1]:
        if not pseudo_inverse:
            raise SingularMatrixError(
                f"Nuisance block for {list(sel.nuisance)} is singular (eigenvalues {eig.tolist()})",
                details={"nuisance": list(sel.nuisance)},
            )
        logger.warning(f"Singular nuisance block for {list(sel.nuisance)}; using pseudo-inverse")
        return cross @ np.linalg.pinv(nuisance, hermitian=True) @ cross.T, True
    factor = cho_factor(nuisance, lower=True)
    return cross @ cho_solve(factor, cross.T), False


def fim_subvector(fim: InfoMatrix, sel: SubvectorSelection, pseudo_inverse: bool = False) -> InfoMatrix:
    """Information on the kept parameters after profiling out the nuisance ones.

    Known parameters are dropped (principal submatrix); nuisance parameters are
    removed through the Schur complement.
    """
    correction, used_pinv = schur_cross_term(fim, sel, pseudo_inverse)
    result = fim.block(sel.kept, sel.kept) - correction
    result = 0.5 * (result + result.T)
    return InfoMatrix(result, sel.kept, pseudo_inverse=used_pinv or fim.pseudo_inverse)


def expected_conditional_fim(model: LinearSDEModel, theta: ThetaLike, s: float, t: float,
                             quad: Optional[QuadratureSettings] = None) -> InfoMatrix:
    """Expected information of X(t) given X(s), averaged over the law of X(s).

    At s = 0 the conditioning value is the initial value itself, so an initial
    value parameter contributes through the transition factor.
    """
    require_general_model(model)
    theta = model.coerce(theta)
    if s < 0:
        raise ValidationError(f"Transition start must be nonnegative, got s={s}")
    if not s < t:
        raise OrderingError(f"Transition information needs s < t, got s={s}, t={t}")
    tr = transition(model, theta, s, t, quad)
    grad = transition_gradient(model, theta, s, t, quad)
    phi, var = float(tr.phi), float(tr.var)
    dphi, dshift, dvar = (np.asarray(x, dtype=float).reshape(-1) for x in grad)
    if s == 0:
        mu_s, var_s = model.initial_value(theta), 0.0
    else:
        mu_s, var_s = mean(model, theta, s, quad), variance(model, theta, s, quad)
    dm = dphi * mu_s + dshift
    label = model.partition.initial_label
    if s == 0 and label is not None:
        dm[model.partition.index(label)] += phi
    dlog_var = dvar / var
    matrix = (np.outer(dm, dm) + var_s * np.outer(dphi, dphi)) / var + 0.5 * np.outer(dlog_var, dlog_var)
    return checked_info_matrix(matrix, model.partition.names, "transition information")


def fim_markov_sum(model: LinearSDEModel, theta: ThetaLike, design: SamplingDesign,
                   quad: Optional[QuadratureSettings] = None,
                   evaluator: Optional[BatchEvaluator] = None) -> InfoMatrix:
    """Information as I_{X(t1)|X(0)} plus the expected transition informations."""
    require_general_model(model)
    theta = model.coerce(theta)
    starts = np.concatenate([[0.0], design.times[:-1]])
    pairs = list(zip(starts.tolist(), design.times.tolist()))
    if evaluator is None:
        evaluator = sequential if model.closed_form else BatchEvaluator()
    terms = evaluator.map(lambda p: expected_conditional_fim(model, theta, p[0], p[1], quad).matrix, pairs)
    total = np.zeros((model.partition.m, model.partition.m))
    for term in terms:
        total = total + term
    metrics.track_fim("markov")
    return checked_info_matrix(total, model.partition.names, "Markov-sum Fisher information")


def info_x0_only(model: LinearSDEModel, theta: ThetaLike, t1: float,
                 quad: Optional[QuadratureSettings] = None) -> float:
    """Information on X0 when it is the only unknown: exp(2 B(t1)) / V[X(t1)]."""
    theta = model.coerce(theta)
    if model.partition.initial_label is None:
        raise ValidationError(f"X0 is not a parameter of model {model.name}")
    if t1 <= 0:
        raise ValidationError(f"First sampling time must be positive, got {t1}")
    B = float(antiderivative(model, theta, t1, quad))
    return float(np.exp(2.0 * B) / variance(model, theta, t1, quad))


def x0_estimate_variance(model: LinearSDEModel, theta: ThetaLike, t1: float,
                         quad: Optional[QuadratureSettings] = None) -> float:
    """Variance of the maximum likelihood estimate of X0 from a design starting at t1."""
    return 1.0 / info_x0_only(model, theta, t1, quad)


def optimal_t1_for_x0(domain: Domain) -> float:
    """The information on X0 decreases in t1, so sample as early as allowed."""
    return domain.T_lo


def _check_rates(theta2: float, theta3: float) -> None:
    if theta2 <= 0 or theta3 <= 0:
        raise ValidationError(f"theta2 and theta3 must be positive, got {theta2}, {theta3}")


def counterexample_info(theta2: float, theta3: float, t):
    """Information on X0 from one observation at t of the drift-anchored model."""
    _check_rates(theta2, theta3)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise ValidationError("Observation time must be positive")
    d = theta2 - theta3
    x = d * t_arr
    exact = np.abs(x) < 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(exact, (1.0 - x / 2.0) / t_arr, d / np.where(exact, 1.0, np.expm1(x)))
    value = np.exp(theta2 * t_arr) * ratio
    return float(value) if np.ndim(t) == 0 else value


def counterexample_tmin(theta2: float, theta3: float) -> float:
    """Minimiser of counterexample_info over t > 0."""
    _check_rates(theta2, theta3)
    if abs(theta2 - theta3) <= 1e-12 * max(theta2, theta3):
        return 1.0 / theta2
    return (np.log(theta2) - np.log(theta3)) / (theta2 - theta3)


def counterexample_optimal_time(theta2: float, theta3: float, domain: Domain) -> float:
    """Single observation time in the domain maximising counterexample_info.

    The information is convex in t, so the maximiser is an endpoint.
    """
    lo = counterexample_info(theta2, theta3, domain.T_lo)
    hi = counterexample_info(theta2, theta3, domain.T_hi)
    return domain.T_hi if hi > lo else domain.T_lo


def fim_ladder(model: LinearSDEModel, theta: ThetaLike, domain: Domain, ns,
               quad: Optional[QuadratureSettings] = None,
               evaluator: Optional[BatchEvaluator] = None):
    """fim_exact along equidistant designs, one per n, in input order."""
    theta = model.coerce(theta)
    evaluator = evaluator or BatchEvaluator()
    return evaluator.map(
        lambda n: fim_exact(model, theta, SamplingDesign.equidistant(domain, n), quad), list(ns)
    )
