"""Utility functions for adaptive-rom."""

import socket
import time
import uuid
from collections.abc import Callable, Iterable, Iterator
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")


def argmax_first(values: np.ndarray) -> int:
    """
    Index of the largest entry, smallest index on ties.

    NaN entries never win; +inf beats every finite value.

    Args:
        values: One-dimensional array of scores

    Returns:
        Winning index
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("argmax of an empty sequence")
    cleaned = np.where(np.isnan(values), -np.inf, values)
    # np.argmax returns the first occurrence of the maximum
    return int(np.argmax(cleaned))


def map_ordered(fn: Callable[[T], R], items: Iterable[T], jobs: int = 1) -> list[R]:
    """
    Apply fn to every item, optionally on a thread pool, keeping input order.

    Args:
        fn: Function to apply
        items: Inputs
        jobs: Worker count (1 runs inline)

    Returns:
        Results in input order
    """
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


class PhaseTimer:
    """Accumulates wall-clock seconds per named phase."""

    def __init__(self):
        self.timings: dict[str, float] = {}

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start

    @property
    def total(self) -> float:
        return sum(self.timings.values())


def get_host_id() -> str:
    """
    Generate a stable identifier for the machine running an experiment.

    Returns:
        Host ID string (hostname + UUID prefix)
    """
    hostname = socket.gethostname()
    mac = uuid.getnode()
    host_uuid = uuid.uuid5(uuid.NAMESPACE_DNS, f"{hostname}-{mac}")
    return f"{hostname}-{host_uuid.hex[:8]}"


def format_duration(seconds: float) -> str:
    """
    Format a duration in human-readable form.

    Args:
        seconds: Duration in seconds

    Returns:
        Formatted string (e.g., "850 ms", "12.3 s", "4 min 05 s")
    """
    if seconds < 1.0:
        return f"{seconds * 1000:.0f} ms"
    if seconds < 60.0:
        return f"{seconds:.1f} s"
    minutes, rest = divmod(int(round(seconds)), 60)
    return f"{minutes} min {rest:02d} s"
