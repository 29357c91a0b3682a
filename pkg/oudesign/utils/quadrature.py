import bisect
import logging
import threading
from typing import Callable, Optional

import numpy as np
from scipy import integrate as sp_integrate

from ..config import QuadratureSettings
from ..exceptions import NumericalError, QuadratureError

logger = logging.getLogger("oudesign")

DEFAULT_QUADRATURE = QuadratureSettings()


def integrate(func: Callable[[float], float], lo: float, hi: float,
              settings: Optional[QuadratureSettings] = None, what: str = "integral") -> float:
    """Adaptive Gauss-Kronrod integral of a scalar function over [lo, hi]."""
    settings = settings or DEFAULT_QUADRATURE
    if hi == lo:
        return 0.0
    result = sp_integrate.quad(
        func, lo, hi,
        epsabs=settings.abs_tol,
        epsrel=settings.rel_tol,
        limit=settings.max_subdivisions,
        full_output=1,
    )
    value, abserr = float(result[0]), float(result[1])
    if len(result) > 3:
        raise QuadratureError(
            f"Quadrature of {what} on [{lo}, {hi}] did not converge: {result[3]}",
            achieved_error=abserr,
            details={"lo": lo, "hi": hi, "value": value},
        )
    if not np.isfinite(value):
        raise NumericalError(f"Non-finite {what} on [{lo}, {hi}]", details={"lo": lo, "hi": hi})
    return value


def integrate_vector(func: Callable[[float], np.ndarray], lo: float, hi: float,
                     settings: Optional[QuadratureSettings] = None, what: str = "integral") -> np.ndarray:
    """Adaptive integral of an array-valued function over [lo, hi]."""
    settings = settings or DEFAULT_QUADRATURE
    result = sp_integrate.quad_vec(
        func, lo, hi,
        epsabs=settings.abs_tol,
        epsrel=settings.rel_tol,
        limit=settings.max_subdivisions,
        full_output=True,
    )
    value, abserr, info = result
    if not info.success:
        raise QuadratureError(
            f"Vector quadrature of {what} on [{lo}, {hi}] did not converge (status {info.status})",
            achieved_error=float(abserr),
            details={"lo": lo, "hi": hi},
        )
    value = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(value)):
        raise NumericalError(f"Non-finite {what} on [{lo}, {hi}]", details={"lo": lo, "hi": hi})
    return value


class CumulativeIntegral:
    """Memoised t -> integral of func from origin to t.

    Evaluations are anchored at the nearest cached knot below t, so a sweep of
    increasing arguments costs one short quadrature each. Readers share the
    knot list; inserts are serialised by a lock.
    """

    def __init__(self, func: Callable[[float], float], origin: float = 0.0,
                 settings: Optional[QuadratureSettings] = None, what: str = "antiderivative"):
        self.func = func
        self.settings = settings or DEFAULT_QUADRATURE
        self.what = what
        self._knots = [float(origin)]
        self._values = [0.0]
        self._lock = threading.Lock()

    def _scalar(self, t: float) -> float:
        with self._lock:
            pos = bisect.bisect_right(self._knots, t) - 1
            if pos >= 0 and self._knots[pos] == t:
                return self._values[pos]
            # below the origin integrate backwards from it
            pos = max(pos, 0)
            knot, base = self._knots[pos], self._values[pos]
        value = base + integrate(self.func, knot, t, self.settings, self.what)
        with self._lock:
            idx = bisect.bisect_left(self._knots, t)
            if idx == len(self._knots) or self._knots[idx] != t:
                self._knots.insert(idx, t)
                self._values.insert(idx, value)
        return value

    def __call__(self, t):
        arr = np.asarray(t, dtype=float)
        if arr.ndim == 0:
            return self._scalar(float(arr))
        flat = [self._scalar(float(x)) for x in arr.reshape(-1)]
        return np.array(flat).reshape(arr.shape)

    @property
    def size(self) -> int:
        return len(self._knots)
