from typing import Callable

import numpy as np

# Optimal central-difference step scale
STEP_SCALE = np.cbrt(np.finfo(float).eps)


def step_sizes(x: np.ndarray) -> np.ndarray:
    """Central-difference steps h_j = cbrt(eps) * max(1, |x_j|)."""
    return STEP_SCALE * np.maximum(1.0, np.abs(np.asarray(x, dtype=float)))


def central_gradient(func: Callable[[np.ndarray], np.ndarray], x: np.ndarray) -> np.ndarray:
    """Gradient of an array-valued function by central differences.

    Returns an array of shape func(x).shape + (len(x),).
    """
    x = np.asarray(x, dtype=float)
    steps = step_sizes(x)
    columns = []
    for j, h in enumerate(steps):
        forward = x.copy()
        backward = x.copy()
        forward[j] += h
        backward[j] -= h
        columns.append((np.asarray(func(forward), dtype=float) - np.asarray(func(backward), dtype=float)) / (2.0 * h))
    return np.stack(columns, axis=-1)


def central_derivative(func: Callable[[np.ndarray], np.ndarray], t: np.ndarray) -> np.ndarray:
    """Pointwise derivative of a vectorised scalar function."""
    t = np.asarray(t, dtype=float)
    h = step_sizes(t)
    return (np.asarray(func(t + h)) - np.asarray(func(t - h))) / (2.0 * h)
