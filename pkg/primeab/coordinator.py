"""Chunked worker pool shared by the integrators and scanners."""

from __future__ import annotations

import os
from collections.abc import Callable, Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

from .const import DEFAULT_THREADS, ENV_THREADS, LOGGER, MAX_THREADS
from .exceptions import ParameterError

T = TypeVar("T")
R = TypeVar("R")


def clamp(value, valuemin, valuemax) -> float | int:
    """Clamp value between min and max."""
    return valuemin if value < valuemin else valuemax if value > valuemax else value


def default_threads() -> int:
    """Return the thread cap from the environment, or the default."""
    raw = os.environ.get(ENV_THREADS)
    if not raw:
        return DEFAULT_THREADS
    try:
        return int(clamp(int(raw), 1, MAX_THREADS))
    except ValueError:
        LOGGER.warning("Ignoring %s=%s, not an integer", ENV_THREADS, raw)
        return DEFAULT_THREADS


def split_range(lo: int, hi: int, chunk: int) -> Iterator[tuple[int, int]]:
    """Yield half-open chunks [a, b) covering [lo, hi)."""
    if chunk < 1:
        raise ParameterError(f"chunk size must be positive, got {chunk}")
    start = lo
    while start < hi:
        yield start, min(start + chunk, hi)
        start += chunk


class ChunkCoordinator:
    """Map a pure function over ordered chunks, results returned in chunk order."""

    def __init__(self, threads: int | None = None) -> None:
        """Initialize the Coordinator."""
        if threads is None:
            threads = default_threads()
        self.threads = int(clamp(int(threads), 1, MAX_THREADS))

    def map(self, func: Callable[[T], R], chunks: Sequence[T]) -> list[R]:
        """Apply func to every chunk."""
        LOGGER.debug("Dispatching %d chunks over %d threads", len(chunks), self.threads)
        if self.threads == 1 or len(chunks) <= 1:
            return [func(chunk) for chunk in chunks]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            # Executor.map preserves input order.
            return list(pool.map(func, chunks))
