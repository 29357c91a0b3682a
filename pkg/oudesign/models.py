from enum import Enum
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import OrderingError, ValidationError

# Relative symmetry tolerance for information matrices
SYMMETRY_TOL = 1e-12


class ParameterRole(str, Enum):
    """Role of a parameter in the linear SDE."""
    INITIAL = "initial"
    MEAN = "mean"
    SHARED = "shared"
    VOLATILITY = "volatility"


class Criterion(str, Enum):
    """Information functions supported by the efficiency module."""
    D = "D"
    E = "E"
    A = "A"


@dataclass(frozen=True)
class ParameterPartition:
    """Ordered parameter labels with their roles.

    Exactly one volatility parameter and at most one initial-value parameter
    are allowed; mean-only and shared parameters may be absent.
    """
    names: Tuple[str, ...]
    roles: Tuple[ParameterRole, ...]

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "roles", tuple(ParameterRole(r) for r in self.roles))
        if len(self.names) != len(self.roles):
            raise ValidationError("Partition needs one role per label")
        if len(set(self.names)) != len(self.names):
            raise ValidationError(f"Duplicate parameter labels in {self.names}")
        if self.roles.count(ParameterRole.VOLATILITY) != 1:
            raise ValidationError("Partition needs exactly one volatility parameter")
        if self.roles.count(ParameterRole.INITIAL) > 1:
            raise ValidationError("Partition allows at most one initial-value parameter")

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[str, Union[str, ParameterRole]]]) -> "ParameterPartition":
        pairs = list(pairs)
        return cls(tuple(p[0] for p in pairs), tuple(ParameterRole(p[1]) for p in pairs))

    @property
    def m(self) -> int:
        return len(self.names)

    @property
    def m1(self) -> int:
        return self.roles.count(ParameterRole.MEAN)

    @property
    def m2(self) -> int:
        return self.roles.count(ParameterRole.SHARED)

    @property
    def initial_label(self) -> Optional[str]:
        for name, role in zip(self.names, self.roles):
            if role is ParameterRole.INITIAL:
                return name
        return None

    @property
    def volatility_label(self) -> str:
        return self.names[self.roles.index(ParameterRole.VOLATILITY)]

    def role(self, label: str) -> ParameterRole:
        return self.roles[self.index(label)]

    def labels_with(self, role: ParameterRole) -> Tuple[str, ...]:
        return tuple(n for n, r in zip(self.names, self.roles) if r is role)

    def index(self, label: str) -> int:
        try:
            return self.names.index(label)
        except ValueError:
            raise ValidationError(f"Unknown parameter label '{label}'; expected one of {list(self.names)}")

    def indices(self, labels: Sequence[str]) -> List[int]:
        return [self.index(label) for label in labels]


@dataclass(frozen=True, eq=False)
class ParameterVector:
    """Parameter values aligned with a partition."""
    partition: ParameterPartition
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.size != self.partition.m:
            raise ValidationError(
                f"Expected {self.partition.m} parameter values for {list(self.partition.names)}, got {values.size}"
            )
        bad = [n for n, v in zip(self.partition.names, values) if not np.isfinite(v)]
        if bad:
            raise ValidationError(f"Parameter values must be finite: {bad}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_mapping(cls, partition: ParameterPartition, mapping: Mapping[str, float]) -> "ParameterVector":
        missing = [n for n in partition.names if n not in mapping]
        if missing:
            raise ValidationError(f"Missing parameter values for {missing}")
        return cls(partition, np.array([float(mapping[n]) for n in partition.names]))

    def __getitem__(self, label: str) -> float:
        return float(self.values[self.partition.index(label)])

    def as_dict(self) -> Dict[str, float]:
        return {n: float(v) for n, v in zip(self.partition.names, self.values)}

    def with_values(self, values: Union[np.ndarray, Mapping[str, float]]) -> "ParameterVector":
        if isinstance(values, Mapping):
            merged = self.as_dict()
            for label, value in values.items():
                self.partition.index(label)
                merged[label] = float(value)
            return ParameterVector.from_mapping(self.partition, merged)
        return ParameterVector(self.partition, values)


@dataclass(frozen=True)
class Domain:
    """Experimental domain [T_lo, T_hi] with 0 < T_lo < T_hi."""
    T_lo: float
    T_hi: float

    def __post_init__(self):
        lo, hi = float(self.T_lo), float(self.T_hi)
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ValidationError("Domain bounds must be finite")
        if lo <= 0:
            raise ValidationError(f"Domain lower bound must be positive, got {lo}")
        if hi <= lo:
            raise ValidationError(f"Domain needs T_lo < T_hi, got [{lo}, {hi}]")
        object.__setattr__(self, "T_lo", lo)
        object.__setattr__(self, "T_hi", hi)

    @property
    def span(self) -> float:
        return self.T_hi - self.T_lo

    def contains(self, t: Union[float, np.ndarray]) -> bool:
        t = np.asarray(t, dtype=float)
        return bool(np.all((t >= self.T_lo) & (t <= self.T_hi)))


@dataclass(frozen=True, eq=False)
class SamplingDesign:
    """Strictly increasing observation times inside a domain."""
    times: np.ndarray
    domain: Domain

    def __post_init__(self):
        times = np.array(self.times, dtype=float).reshape(-1)
        if times.size < 1:
            raise ValidationError("A design needs at least one time")
        if not np.all(np.isfinite(times)):
            raise ValidationError("Design times must be finite")
        if not self.domain.contains(times):
            raise ValidationError(
                f"Design times must lie in [{self.domain.T_lo}, {self.domain.T_hi}]"
            )
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise OrderingError("Design times must be strictly increasing")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

    @classmethod
    def equidistant(cls, domain: Domain, n: int) -> "SamplingDesign":
        """n equally spaced times pinned at both ends of the domain."""
        if n < 2:
            raise ValidationError(f"An equidistant design needs n >= 2, got {n}")
        times = np.linspace(domain.T_lo, domain.T_hi, int(n))
        times[0], times[-1] = domain.T_lo, domain.T_hi
        return cls(times, domain)

    @property
    def n(self) -> int:
        return int(self.times.size)

    @property
    def norm(self) -> float:
        """Largest consecutive gap; zero for a single time."""
        if self.n < 2:
            return 0.0
        return float(np.max(np.diff(self.times)))


@dataclass(frozen=True, eq=False)
class ProductCovariance:
    """Factors (u, v) with Sigma_ij = u_i v_j for i <= j."""
    times: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        for name in ("times", "u", "v"):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.times.size == self.u.size == self.v.size):
            raise ValidationError("Product covariance factors must have equal lengths")

    @property
    def n(self) -> int:
        return int(self.times.size)

    @property
    def ratio(self) -> np.ndarray:
        return self.u / self.v


@dataclass(frozen=True, eq=False)
class InfoMatrix:
    """Symmetric information matrix indexed by parameter labels."""
    matrix: np.ndarray
    labels: Tuple[str, ...]
    pseudo_inverse: bool = False

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=float)
        labels = tuple(self.labels)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValidationError(f"Information matrix must be square, got shape {matrix.shape}")
        if matrix.shape[0] != len(labels):
            raise ValidationError("Information matrix needs one label per row")
        if not np.all(np.isfinite(matrix)):
            raise ValidationError("Information matrix has non-finite entries")
        scale = 1.0 + np.max(np.abs(matrix), initial=0.0)
        if np.max(np.abs(matrix - matrix.T), initial=0.0) > SYMMETRY_TOL * scale:
            raise ValidationError("Information matrix must be symmetric")
        matrix = 0.5 * (matrix + matrix.T)
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "labels", labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValidationError(f"Label '{label}' not in information matrix {list(self.labels)}")

    def entry(self, row: str, col: str) -> float:
        return float(self.matrix[self.index(row), self.index(col)])

    def block(self, rows: Sequence[str], cols: Sequence[str]) -> np.ndarray:
        r = [self.index(x) for x in rows]
        c = [self.index(x) for x in cols]
        return self.matrix[np.ix_(r, c)]

    def restrict(self, labels: Sequence[str]) -> "InfoMatrix":
        return InfoMatrix(self.block(labels, labels), tuple(labels), self.pseudo_inverse)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def is_nonnegative_definite(self, tol: float = 1e-9) -> bool:
        eig = self.eigenvalues()
        return bool(eig[0] >= -tol * max(1.0, abs(eig[-1])))

    def loewner_geq(self, other: "InfoMatrix", tol: float = 1e-9) -> bool:
        """True when self - other is nonnegative definite within tol."""
        if other.labels != self.labels:
            other = other.restrict(self.labels)
        diff = self.matrix - other.matrix
        eig = np.linalg.eigvalsh(0.5 * (diff + diff.T))
        scale = max(1.0, float(np.max(np.abs(self.matrix), initial=0.0)))
        return bool(eig[0] >= -tol * scale)

    def scaled(self, factor: float) -> "InfoMatrix":
        return InfoMatrix(self.matrix * factor, self.labels, self.pseudo_inverse)

    def __add__(self, other: "InfoMatrix") -> "InfoMatrix":
        if other.labels != self.labels:
            raise ValidationError("Cannot add information matrices with different labels")
        return InfoMatrix(self.matrix + other.matrix, self.labels, self.pseudo_inverse or other.pseudo_inverse)

    def __sub__(self, other: "InfoMatrix") -> "InfoMatrix":
        if other.labels != self.labels:
            raise ValidationError("Cannot subtract information matrices with different labels")
        return InfoMatrix(self.matrix - other.matrix, self.labels, self.pseudo_inverse or other.pseudo_inverse)

    def to_rows(self) -> List[List[Union[str, float]]]:
        return [[label] + [float(x) for x in row] for label, row in zip(self.labels, self.matrix)]


@dataclass(frozen=True)
class SubvectorSelection:
    """Parameters of interest, nuisance parameters, and parameters held known."""
    kept: Tuple[str, ...]
    nuisance: Tuple[str, ...] = ()
    known: Tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "kept", tuple(self.kept))
        object.__setattr__(self, "nuisance", tuple(self.nuisance))
        object.__setattr__(self, "known", tuple(self.known))
        if not self.kept:
            raise ValidationError("Selection needs at least one kept parameter")
        all_labels = self.kept + self.nuisance + self.known
        if len(set(all_labels)) != len(all_labels):
            raise ValidationError("Kept, nuisance and known labels must be disjoint")

    @classmethod
    def complete(cls, partition: ParameterPartition, kept: Sequence[str],
                 known: Sequence[str] = ()) -> "SubvectorSelection":
        """Selection whose nuisance set is every label not kept or known."""
        for label in list(kept) + list(known):
            partition.index(label)
        nuisance = tuple(n for n in partition.names if n not in kept and n not in known)
        return cls(tuple(kept), nuisance, tuple(known))

    @property
    def estimated(self) -> Tuple[str, ...]:
        return self.kept + self.nuisance

    def validate(self, labels: Sequence[str]) -> None:
        """Check that kept, nuisance and known labels cover exactly the given labels."""
        chosen = set(self.kept + self.nuisance + self.known)
        if chosen != set(labels):
            raise ValidationError(
                f"Selection {sorted(chosen)} must cover the parameters {list(labels)}"
            )


__all__ = [
    "ParameterRole",
    "Criterion",
    "ParameterPartition",
    "ParameterVector",
    "Domain",
    "SamplingDesign",
    "ProductCovariance",
    "InfoMatrix",
    "SubvectorSelection",
]
