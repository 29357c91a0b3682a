from numbers import Integral
from typing import Sequence

from .config import OptimizerSettings
from .exceptions import DegenerateDesignError, ValidationError
from .models import Domain, SubvectorSelection
from .sde import LinearSDEModel


class DesignValidator:
    """Utility class for validating design and study inputs."""

    MIN_REPLICATIONS = 100
    MIN_LADDER_N = 2
    MIN_GAP_FRACTION = 1e-6  # default min_gap as a share of the domain span

    @classmethod
    def validate_n(cls, n: int, minimum: int = 1, what: str = "Number of observations") -> None:
        """Validate a count such as a design size."""
        if isinstance(n, bool) or not isinstance(n, Integral):
            raise ValidationError(f"{what} must be an integer, got {n!r}")
        if n < minimum:
            raise ValidationError(f"{what} must be at least {minimum}, got {n}")

    @classmethod
    def validate_ladder(cls, ns: Sequence[int]) -> None:
        """Validate a list of design sizes for equidistant ladders."""
        if not ns:
            raise ValidationError("Design-size list cannot be empty")
        for n in ns:
            cls.validate_n(n, cls.MIN_LADDER_N)

    @classmethod
    def min_gap(cls, domain: Domain, opts: OptimizerSettings = None) -> float:
        if opts is not None and opts.min_gap is not None:
            return opts.min_gap
        return cls.MIN_GAP_FRACTION * domain.span

    @classmethod
    def validate_spacing(cls, domain: Domain, n: int, min_gap: float) -> None:
        """Check that n points with pairwise gaps >= min_gap fit in the domain."""
        if min_gap <= 0:
            raise ValidationError(f"min_gap must be positive, got {min_gap}")
        if (n - 1) * min_gap > domain.span:
            raise DegenerateDesignError(
                f"Domain [{domain.T_lo}, {domain.T_hi}] cannot host {n} points with min_gap {min_gap}"
            )

    @classmethod
    def validate_optimizer(cls, opts: OptimizerSettings, n: int) -> None:
        """Validate optimizer settings against the design size."""
        if opts.grid_size < n + 1:
            raise ValidationError(f"grid_size must be at least n + 1 = {n + 1}, got {opts.grid_size}")

    @classmethod
    def validate_estimable(cls, model: LinearSDEModel, sel: SubvectorSelection, n: int) -> None:
        """Full-parameter estimation needs at least as many observations as parameters."""
        sel.validate(model.partition.names)
        m = model.partition.m
        if set(sel.kept) == set(model.partition.names) and n < m:
            raise ValidationError(
                f"Estimating all {m} parameters of {model.name} needs n >= {m}, got {n}"
            )

    @classmethod
    def validate_replications(cls, replications: int) -> None:
        """Validate a Monte-Carlo replication count."""
        cls.validate_n(replications, cls.MIN_REPLICATIONS, "Replication count")
