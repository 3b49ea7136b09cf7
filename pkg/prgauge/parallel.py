import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable
from typing import List
from typing import Optional
from typing import Sequence
from typing import TypeVar

from prgauge.errors import ConfigError

THREADS_ENV = "PRGAUGE_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def worker_count() -> int:
    """Worker cap from PRGAUGE_THREADS, defaulting to the CPU count."""
    raw = os.getenv(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return os.cpu_count() or 1
    try:
        count = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got '{raw}'")
    if count < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got '{raw}'")
    return count


def map_ordered(fn: Callable[[T], R], items: Sequence[T], workers: Optional[int] = None) -> List[R]:
    """Applies fn to every item; results come back in item order whatever the scheduling."""
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as executor:
        return list(executor.map(fn, items))
