import logging
from typing import List, NamedTuple, Optional, Sequence, Union

import numpy as np

from .asymptotic import AsymptoticInfo, fim_asymptotic
from .batch import BatchEvaluator
from .config import QuadratureSettings
from .exceptions import CriterionDegenerateError, ValidationError
from .fisher import fim_exact, fim_ladder, fim_subvector, schur_cross_term
from .models import Criterion, Domain, InfoMatrix, SamplingDesign, SubvectorSelection
from .sde import LinearSDEModel, ThetaLike

logger = logging.getLogger("oudesign")

# Eigenvalue ratio below which a matrix counts as singular
SINGULAR_RTOL = 1e-12


class EfficiencyRow(NamedTuple):
    n: int
    criterion: Criterion
    ueff: float


def criterion_value(M: Union[InfoMatrix, np.ndarray], c: Union[Criterion, str]) -> float:
    """Information function: D = det^(1/k), E = smallest eigenvalue, A = k / tr(M^-1)."""
    c = Criterion(c)
    matrix = M.matrix if isinstance(M, InfoMatrix) else np.asarray(M, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] < 1:
        raise ValidationError(f"Criterion needs a square matrix, got shape {matrix.shape}")
    scale = 1.0 + float(np.max(np.abs(matrix)))
    if np.max(np.abs(matrix - matrix.T)) > 1e-12 * scale:
        raise ValidationError("Criterion needs a symmetric matrix")
    eig = np.linalg.eigvalsh(0.5 * (matrix + matrix.T))
    k = eig.size
    if eig[-1] <= 0 or eig[0] <= SINGULAR_RTOL * eig[-1]:
        return 0.0
    if c is Criterion.E:
        return float(eig[0])
    if c is Criterion.D:
        return float(np.exp(np.mean(np.log(eig))))
    return float(k / np.sum(1.0 / eig))


def _denominator(asymptotic: AsymptoticInfo, sel: SubvectorSelection, c: Criterion) -> float:
    block = asymptotic.i_inf.restrict(sel.kept)
    if not np.isfinite(block.eigenvalues()[-1]):
        raise CriterionDegenerateError("Trajectory information has an infinite eigenvalue")
    value = criterion_value(block, c)
    if value <= 0:
        raise CriterionDegenerateError(
            f"{c.value}-criterion of the trajectory information on {list(sel.kept)} is zero"
        )
    return value


def efficiency_ratio(info_I: InfoMatrix, limit: InfoMatrix, c: Union[Criterion, str]) -> float:
    """Phi[info_I] / Phi[limit] for matrices on the same labels."""
    c = Criterion(c)
    den = criterion_value(limit, c)
    if den <= 0:
        raise CriterionDegenerateError(f"{c.value}-criterion of the reference information is zero")
    return criterion_value(info_I, c) / den


def ultimate_efficiency(model: LinearSDEModel, theta: ThetaLike, design: SamplingDesign,
                        sel: SubvectorSelection, c: Union[Criterion, str],
                        asymptotic: Optional[AsymptoticInfo] = None,
                        quad: Optional[QuadratureSettings] = None,
                        pseudo_inverse: bool = False) -> float:
    """Phi of the design's profiled information over Phi of the trajectory information."""
    c = Criterion(c)
    theta = model.coerce(theta)
    sel.validate(model.partition.names)
    asymptotic = asymptotic or fim_asymptotic(model, theta, design.domain, quad)
    den = _denominator(asymptotic, sel, c)
    info_I = fim_subvector(fim_exact(model, theta, design, quad), sel, pseudo_inverse)
    return criterion_value(info_I, c) / den


def efficiency_table(model: LinearSDEModel, theta: ThetaLike, domain: Domain, ns: Sequence[int],
                     criteria: Sequence[Union[Criterion, str]], sel: SubvectorSelection,
                     quad: Optional[QuadratureSettings] = None,
                     evaluator: Optional[BatchEvaluator] = None) -> List[EfficiencyRow]:
    """Ultimate efficiencies of equidistant designs, rows ordered by n then criterion."""
    theta = model.coerce(theta)
    sel.validate(model.partition.names)
    criteria = [Criterion(c) for c in criteria]
    asymptotic = fim_asymptotic(model, theta, domain, quad)
    denominators = {c: _denominator(asymptotic, sel, c) for c in criteria}
    rows = []
    for n, fim in zip(ns, fim_ladder(model, theta, domain, ns, quad, evaluator)):
        info_I = fim_subvector(fim, sel)
        for c in criteria:
            rows.append(EfficiencyRow(int(n), c, criterion_value(info_I, c) / denominators[c]))
    return rows


def cross_term_diagnostic(model: LinearSDEModel, theta: ThetaLike, domain: Domain,
                          sel: SubvectorSelection, n_ladder: Sequence[int],
                          quad: Optional[QuadratureSettings] = None,
                          evaluator: Optional[BatchEvaluator] = None) -> List[float]:
    """Max-abs entry of I_{I,II} I_{II,II}^-1 I_{II,I} along an equidistant ladder."""
    ladder = [int(n) for n in n_ladder]
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ValidationError(f"Ladder must be strictly increasing, got {ladder}")
    sel.validate(model.partition.names)
    values = []
    for fim in fim_ladder(model, theta, domain, ladder, quad, evaluator):
        cross, _ = schur_cross_term(fim, sel)
        values.append(float(np.max(np.abs(cross), initial=0.0)))
    return values
