from .finite_diff import central_derivative, central_gradient
from .quadrature import CumulativeIntegral, integrate, integrate_vector

__all__ = [
    "central_derivative",
    "central_gradient",
    "CumulativeIntegral",
    "integrate",
    "integrate_vector",
]
