import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from .exceptions import ValidationError

logger = logging.getLogger("oudesign")

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "OU_DESIGN_THREADS"


def worker_count() -> int:
    """Worker cap from OU_DESIGN_THREADS, defaulting to the CPU count."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise ValidationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    if value < 1:
        raise ValidationError(f"{THREADS_ENV} must be a positive integer, got {value}")
    return value


class BatchEvaluator:
    """Runs independent work items on a thread pool, keeping input order."""

    def __init__(self, max_workers: Optional[int] = None):
        if max_workers is not None and max_workers < 1:
            raise ValidationError("max_workers must be at least 1")
        self.max_workers = max_workers

    @property
    def workers(self) -> int:
        return self.max_workers or worker_count()

    def map(self, func: Callable[[T], R], items: Iterable[T]) -> List[R]:
        items = list(items)
        workers = min(self.workers, len(items))
        if workers <= 1:
            return [func(item) for item in items]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, items))


sequential = BatchEvaluator(max_workers=1)
