"""Sampling designs: construction, repair of degenerate designs, and optimisation.

optimize_design runs a multi-start coordinate exchange. Each restart moves one
time at a time to the best point of a grid slice between its neighbours, then
refines on finer local grids around the incumbent. Restarts after the first
start from seeded random designs, so results depend only on the seed.
"""
import logging
from typing import List, NamedTuple, Optional, Sequence, Union

import numpy as np

from .batch import BatchEvaluator
from .config import OptimizerSettings, QuadratureSettings
from .efficiency import criterion_value
from .exceptions import (
    CriterionDegenerateError,
    DegenerateDesignError,
    InternalConsistencyError,
    SingularMatrixError,
)
from .fisher import fim_exact, fim_subvector
from .hooks import HookManager
from .metrics import metrics
from .models import Criterion, Domain, SamplingDesign, SubvectorSelection
from .sde import LinearSDEModel, ThetaLike
from .validator import DesignValidator

logger = logging.getLogger("oudesign")

# Relative gain a move must achieve to be accepted
IMPROVE_RTOL = 1e-12
# Local refinement grid: incumbent +- REFINE_STEPS fine steps
REFINE_STEPS = 10


class OptimizedDesign(NamedTuple):
    design: SamplingDesign
    value: float


class _RestartResult(NamedTuple):
    times: np.ndarray
    value: float
    start_value: float


def equidistant_design(domain: Domain, n: int) -> SamplingDesign:
    """t_i = T_lo + (i - 1) (T_hi - T_lo) / (n - 1)."""
    return SamplingDesign.equidistant(domain, n)


def repair_design(times: Sequence[float], domain: Domain, min_gap: Optional[float] = None) -> SamplingDesign:
    """Turn a possibly unordered or tied set of times into a feasible design of the same size.

    Times closer than min_gap to an earlier kept time are dropped, then points
    are added one by one at the midpoint of the largest gap between consecutive
    kept times and the domain ends, the earliest gap winning ties.
    """
    raw = np.sort(np.asarray(times, dtype=float).reshape(-1))
    n = raw.size
    DesignValidator.validate_n(n)
    min_gap = min_gap if min_gap is not None else DesignValidator.MIN_GAP_FRACTION * domain.span
    DesignValidator.validate_spacing(domain, n, min_gap)
    if not domain.contains(raw):
        raise DegenerateDesignError(f"Times must lie in [{domain.T_lo}, {domain.T_hi}]")

    kept = [float(raw[0])]
    for t in raw[1:]:
        if t - kept[-1] >= min_gap:
            kept.append(float(t))
    if len(kept) == n:
        return SamplingDesign(np.array(kept), domain)

    dropped = n - len(kept)
    tie_tol = 1e-12 * domain.span
    while len(kept) < n:
        edges = [domain.T_lo] + kept + [domain.T_hi]
        lengths = np.diff(edges)
        longest = float(np.max(lengths))
        if longest < 2.0 * min_gap:
            raise DegenerateDesignError(
                f"No gap of [{domain.T_lo}, {domain.T_hi}] can host another point with min_gap {min_gap}"
            )
        j = int(np.argmax(lengths >= longest - tie_tol))
        kept = sorted(kept + [0.5 * (edges[j] + edges[j + 1])])
    logger.debug(f"Repaired design: replaced {dropped} coincident time(s), result {kept}")
    return SamplingDesign(np.array(kept), domain)


def _objective(model: LinearSDEModel, theta, domain: Domain, sel: SubvectorSelection,
               c: Criterion, quad: Optional[QuadratureSettings]):
    def evaluate(times: np.ndarray) -> float:
        try:
            info = fim_subvector(fim_exact(model, theta, SamplingDesign(times, domain), quad), sel)
        except (DegenerateDesignError, SingularMatrixError, InternalConsistencyError) as e:
            logger.debug(f"Candidate {times.tolist()} treated as degenerate: {e.message}")
            return 0.0
        return criterion_value(info, c)

    return evaluate


class _CoordinateExchange:
    """One restart of the exchange search."""

    def __init__(self, evaluate, domain: Domain, min_gap: float, opts: OptimizerSettings,
                 hooks: Optional[HookManager], restart: int):
        self.evaluate = evaluate
        self.domain = domain
        self.min_gap = min_gap
        self.opts = opts
        self.hooks = hooks
        self.restart = restart
        self.grid = np.linspace(domain.T_lo, domain.T_hi, opts.grid_size)
        self.grid[0], self.grid[-1] = domain.T_lo, domain.T_hi
        self.step = domain.span / (opts.grid_size - 1)

    def _slice(self, times: np.ndarray, i: int):
        lo = times[i - 1] + self.min_gap if i > 0 else self.domain.T_lo
        hi = times[i + 1] - self.min_gap if i < times.size - 1 else self.domain.T_hi
        return lo, hi

    def _candidates(self, times: np.ndarray, i: int, level: int) -> np.ndarray:
        lo, hi = self._slice(times, i)
        if level == 0:
            cands = self.grid[(self.grid >= lo) & (self.grid <= hi)]
        else:
            fine = self.step / 10.0 ** level
            cands = np.unique(np.clip(times[i] + fine * np.arange(-REFINE_STEPS, REFINE_STEPS + 1), lo, hi))
        return cands[cands != times[i]]

    def _sweep(self, times: np.ndarray, value: float, level: int):
        moved = False
        for i in range(times.size):
            cands = self._candidates(times, i, level)
            if cands.size == 0:
                continue
            values = []
            for t in cands:
                trial = times.copy()
                trial[i] = t
                values.append(self.evaluate(trial))
            j = int(np.argmax(values))
            if values[j] > value + IMPROVE_RTOL * abs(value):
                times = times.copy()
                times[i] = cands[j]
                value = values[j]
                moved = True
        return times, value, moved

    def run(self, start: np.ndarray) -> _RestartResult:
        times = np.array(start, dtype=float)
        start_value = value = self.evaluate(times)
        for level in range(self.opts.refine_rounds + 1):
            for sweep in range(self.opts.max_sweeps):
                with metrics.sweep_seconds.time():
                    times, value, moved = self._sweep(times, value, level)
                metrics.exchange_sweeps.inc()
                if self.hooks:
                    self.hooks.run("sweep_completed", {
                        "restart": self.restart, "level": level, "sweep": sweep,
                        "value": value, "times": times.tolist(),
                    })
                if not moved:
                    break
        logger.debug(f"Restart {self.restart}: {start_value:.6g} -> {value:.6g}")
        return _RestartResult(times, value, start_value)


def _starts(domain: Domain, n: int, min_gap: float, opts: OptimizerSettings) -> List[np.ndarray]:
    if n == 1:
        first = np.array([0.5 * (domain.T_lo + domain.T_hi)])
    else:
        first = equidistant_design(domain, n).times
    starts = [np.array(first)]
    for seq in np.random.SeedSequence(opts.seed).spawn(opts.restarts - 1):
        rng = np.random.default_rng(seq)
        raw = rng.uniform(domain.T_lo, domain.T_hi, size=n)
        starts.append(np.array(repair_design(raw, domain, min_gap).times))
    return starts


def optimize_design(model: LinearSDEModel, theta: ThetaLike, n: int, domain: Domain,
                    sel: SubvectorSelection, c: Union[Criterion, str],
                    opts: Optional[OptimizerSettings] = None,
                    hooks: Optional[HookManager] = None,
                    quad: Optional[QuadratureSettings] = None,
                    evaluator: Optional[BatchEvaluator] = None) -> OptimizedDesign:
    """Maximise Phi of the profiled information over feasible n-point designs."""
    c = Criterion(c)
    opts = opts or OptimizerSettings()
    theta = model.coerce(theta)
    DesignValidator.validate_n(n)
    DesignValidator.validate_estimable(model, sel, n)
    DesignValidator.validate_optimizer(opts, n)
    min_gap = DesignValidator.min_gap(domain, opts)
    DesignValidator.validate_spacing(domain, n, min_gap)

    evaluate = _objective(model, theta, domain, sel, c, quad)
    starts = _starts(domain, n, min_gap, opts)
    evaluator = evaluator or BatchEvaluator()

    def run(restart: int) -> _RestartResult:
        result = _CoordinateExchange(evaluate, domain, min_gap, opts, hooks, restart).run(starts[restart])
        if hooks:
            hooks.run("restart_completed", {"restart": restart, "value": result.value, "times": result.times.tolist()})
        return result

    results = evaluator.map(run, range(len(starts)))
    best = results[0]
    for result in results[1:]:
        if result.value > best.value:
            best = result
    if best.value <= 0:
        raise CriterionDegenerateError(
            f"{c.value}-criterion is zero at every candidate design for n={n}",
            details={"model": model.name, "kept": list(sel.kept)},
        )
    if best.value < results[0].start_value:
        raise InternalConsistencyError("Optimised design is worse than the equidistant start")
    logger.info(f"Optimised {c.value}-criterion for {model.name}, n={n}: {best.value:.6g}")
    return OptimizedDesign(SamplingDesign(best.times, domain), float(best.value))
