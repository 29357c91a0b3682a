"""Exact sampling, Gaussian likelihood and Monte-Carlo checks of the information calculus."""
import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import Bounds, minimize

from .batch import BatchEvaluator
from .config import QuadratureSettings
from .covariance import log_determinant, product_factors, quad_form_inverse
from .exceptions import (
    DegenerateDesignError,
    InternalConsistencyError,
    NumericalError,
    SingularMatrixError,
    ValidationError,
)
from .fisher import fim_exact, fim_subvector
from .hooks import HookManager
from .metrics import metrics
from .models import Domain, ParameterVector, SamplingDesign, SubvectorSelection
from .moments import mean, transition
from .sde import LinearSDEModel, ThetaLike
from .validator import DesignValidator

logger = logging.getLogger("oudesign")

LOG_2PI = float(np.log(2.0 * np.pi))
MAX_ITER = 2000
XATOL = 1e-8
FATOL = 1e-10


class MleResult(NamedTuple):
    theta: ParameterVector
    log_likelihood: float
    iterations: int
    converged: bool


@dataclass(frozen=True, eq=False)
class McReport:
    replications: int
    seed: int
    n: int
    labels: tuple
    truth: np.ndarray
    mean: np.ndarray
    covariance: np.ndarray
    crlb: np.ndarray
    variance_ratios: np.ndarray
    non_converged: int

    def variance(self, label: str) -> float:
        i = self.labels.index(label)
        return float(self.covariance[i, i])

    def ratio(self, label: str) -> float:
        return float(self.variance_ratios[self.labels.index(label)])

    def estimate_mean(self, label: str) -> float:
        return float(self.mean[self.labels.index(label)])

    def standard_error(self, label: str) -> float:
        """Monte-Carlo standard error of estimate_mean."""
        return float(np.sqrt(self.variance(label) / self.replications))

    def to_rows(self) -> List[list]:
        rows = []
        for i, label in enumerate(self.labels):
            rows.append([
                label, float(self.truth[i]), float(self.mean[i]), float(self.covariance[i, i]),
                float(self.crlb[i, i]), float(self.variance_ratios[i]),
            ])
        return rows


def replication_rng(seed: int, replication: int) -> np.random.Generator:
    """Stream for one replication, independent of the order replications run in."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replication,)))


def _draw(model: LinearSDEModel, theta: ParameterVector, design: SamplingDesign, normals: np.ndarray,
          quad: Optional[QuadratureSettings]) -> np.ndarray:
    starts = np.concatenate([[0.0], design.times[:-1]])
    tr = transition(model, theta, starts, design.times, quad)
    scale = np.sqrt(np.asarray(tr.var, dtype=float))
    paths = np.empty(normals.shape)
    previous = np.full(normals.shape[0], model.initial_value(theta))
    for i in range(design.n):
        previous = tr.phi[i] * previous + tr.shift[i] + scale[i] * normals[:, i]
        paths[:, i] = previous
    return paths


def sample_paths(model: LinearSDEModel, theta: ThetaLike, design: SamplingDesign, size: int, seed: int,
                 quad: Optional[QuadratureSettings] = None) -> np.ndarray:
    """size independent observations of X(tau) through exact Gaussian transitions, shaped (size, n)."""
    DesignValidator.validate_n(size, 1, "Sample size")
    theta = model.coerce(theta)
    rng = np.random.default_rng(seed)
    return _draw(model, theta, design, rng.standard_normal((size, design.n)), quad)


def sample_path(model: LinearSDEModel, theta: ThetaLike, design: SamplingDesign, seed: int,
                quad: Optional[QuadratureSettings] = None) -> np.ndarray:
    return sample_paths(model, theta, design, 1, seed, quad)[0]


def log_likelihood(model: LinearSDEModel, theta: ThetaLike, design: SamplingDesign, data: Sequence[float],
                   quad: Optional[QuadratureSettings] = None) -> float:
    """Gaussian log-density of the observations, evaluated in O(n) through the product covariance."""
    theta = model.coerce(theta)
    data = np.asarray(data, dtype=float).reshape(-1)
    if data.size != design.n:
        raise ValidationError(f"Expected {design.n} observations, got {data.size}")
    pc = product_factors(model, theta, design, quad)
    resid = data - np.asarray(mean(model, theta, design.times, quad), dtype=float)
    return -0.5 * (design.n * LOG_2PI + log_determinant(pc) + quad_form_inverse(pc, resid, resid))


def mle_fit(model: LinearSDEModel, design: SamplingDesign, data: Sequence[float],
            theta_init: ThetaLike = None, free: Optional[Sequence[str]] = None,
            quad: Optional[QuadratureSettings] = None) -> MleResult:
    """Bounded Nelder-Mead maximisation of the log-likelihood over the free labels."""
    theta_init = model.coerce(theta_init)
    free = tuple(free) if free is not None else model.partition.names
    idx = model.partition.indices(free)
    if design.n < len(free):
        raise ValidationError(f"Cannot estimate {len(free)} parameters from {design.n} observations")
    data = np.asarray(data, dtype=float)
    lo = np.array([model.bounds.get(label, (-np.inf, np.inf))[0] for label in free])
    hi = np.array([model.bounds.get(label, (-np.inf, np.inf))[1] for label in free])
    start = np.clip(theta_init.values[idx], lo, hi)

    def full(x: np.ndarray) -> ParameterVector:
        values = np.array(theta_init.values)
        values[idx] = x
        return theta_init.with_values(values)

    def objective(x: np.ndarray) -> float:
        try:
            return -log_likelihood(model, full(x), design, data, quad)
        except (NumericalError, DegenerateDesignError, InternalConsistencyError, ValidationError):
            return np.inf

    res = minimize(
        objective, start, method="Nelder-Mead", bounds=Bounds(lo, hi),
        options={"maxiter": MAX_ITER, "xatol": XATOL, "fatol": FATOL},
    )
    if not res.success:
        logger.warning(f"MLE for {model.name} did not converge after {res.nit} iterations: {res.message}")
    return MleResult(full(res.x), float(-res.fun), int(res.nit), bool(res.success))


def mc_crlb_study(model: LinearSDEModel, theta: ThetaLike, design: SamplingDesign, sel: SubvectorSelection,
                  replications: int, seed: int, quad: Optional[QuadratureSettings] = None,
                  evaluator: Optional[BatchEvaluator] = None,
                  hooks: Optional[HookManager] = None) -> McReport:
    """Compare the spread of maximum likelihood estimates with the inverse profiled information."""
    DesignValidator.validate_replications(replications)
    theta = model.coerce(theta)
    sel.validate(model.partition.names)
    info = fim_subvector(fim_exact(model, theta, design, quad), sel)
    try:
        crlb = np.linalg.inv(info.matrix)
    except np.linalg.LinAlgError as e:
        raise SingularMatrixError(f"Profiled information on {list(sel.kept)} is singular: {str(e)}") from e
    kept_idx = model.partition.indices(sel.kept)

    def replicate(r: int):
        metrics.active_replications.inc()
        try:
            rng = replication_rng(seed, r)
            data = _draw(model, theta, design, rng.standard_normal((1, design.n)), quad)[0]
            fit = mle_fit(model, design, data, theta, sel.estimated, quad)
        finally:
            metrics.active_replications.dec()
        if hooks:
            hooks.run("replication_completed", {"replication": r, "converged": fit.converged})
        return fit.theta.values[kept_idx], fit.converged

    results = (evaluator or BatchEvaluator()).map(replicate, range(replications))
    estimates = np.array([r[0] for r in results])
    covariance = np.atleast_2d(np.cov(estimates, rowvar=False))
    non_converged = sum(1 for r in results if not r[1])
    if non_converged:
        logger.warning(f"{non_converged} of {replications} fits did not converge")
    report = McReport(
        replications=replications,
        seed=seed,
        n=design.n,
        labels=tuple(sel.kept),
        truth=theta.values[kept_idx],
        mean=estimates.mean(axis=0),
        covariance=covariance,
        crlb=crlb,
        variance_ratios=np.diag(covariance) / np.diag(crlb),
        non_converged=non_converged,
    )
    logger.info(f"Monte-Carlo study n={design.n}, R={replications}: ratios {report.variance_ratios.round(4).tolist()}")
    return report


def consistency_ladder(model: LinearSDEModel, theta: ThetaLike, domain: Domain, ns: Sequence[int],
                       sel: SubvectorSelection, replications: int, seed: int,
                       quad: Optional[QuadratureSettings] = None,
                       evaluator: Optional[BatchEvaluator] = None) -> List[McReport]:
    """Monte-Carlo reports along equidistant designs of growing size."""
    DesignValidator.validate_ladder(list(ns))
    return [
        mc_crlb_study(model, theta, SamplingDesign.equidistant(domain, n), sel, replications, seed, quad, evaluator)
        for n in ns
    ]
