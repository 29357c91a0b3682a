from typing import Any, Dict, Optional


class OUDesignError(Exception):
    """Base exception for oudesign."""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}


class ValidationError(OUDesignError):
    """Raised when an input fails validation."""
    pass


class OrderingError(ValidationError):
    """Raised when times are out of order (s >= t, unsorted designs)."""
    pass


class ConfigError(ValidationError):
    """Raised when a run configuration cannot be parsed or validated."""
    pass


class NumericalError(OUDesignError):
    """Raised when an evaluation produces a non-finite or inadmissible value."""
    pass


class QuadratureError(NumericalError):
    """Raised when adaptive quadrature misses its tolerance."""
    def __init__(self, message: str, achieved_error: float, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, details)
        self.achieved_error = achieved_error


class DegenerateDesignError(OUDesignError):
    """Raised when a design cannot carry a positive definite covariance."""
    pass


class DesignSizeError(OUDesignError):
    """Raised when a dense operation is requested beyond the dense cap."""
    pass


class InternalConsistencyError(OUDesignError):
    """Raised when a computed quantity violates a structural invariant."""
    pass


class CriterionDegenerateError(OUDesignError):
    """Raised when an information function vanishes where a positive value is needed."""
    pass


class SingularMatrixError(OUDesignError):
    """Raised when a nuisance block cannot be inverted."""
    pass
