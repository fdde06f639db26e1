"""Thread-pool helpers with a determinism-preserving contract.

Work is always decomposed the same way regardless of the worker count; tasks
write to disjoint outputs or return values combined by position, so results
are independent of scheduling.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence

WORKERS_ENV = "ORTHODICT_WORKERS"


def resolve_workers(workers: int | None = None) -> int:
    """Explicit count, else the ORTHODICT_WORKERS variable, else the CPU count."""
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        if env is not None:
            try:
                workers = int(env)
            except ValueError:
                raise ValueError(f"{WORKERS_ENV} must be an integer, got {env!r}")
        else:
            workers = os.cpu_count() or 1
    if workers < 1:
        raise ValueError(f"worker count must be at least 1, got {workers}")
    return workers


def run_tasks(fn: Callable, args: Iterable, workers: int) -> list:
    """Apply fn to each argument, in a pool when workers > 1.

    Results come back in argument order either way.
    """
    args = list(args)
    if workers == 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, args))


def tile_spans(total: int, tile: int) -> list[tuple[int, int]]:
    """Fixed [start, end) spans of width ``tile`` covering ``total`` columns."""
    return [(s, min(s + tile, total)) for s in range(0, total, tile)]


def group_spans(
    spans: Sequence[tuple[int, int]], per_unit: int
) -> list[list[tuple[int, int]]]:
    """Group consecutive spans into parallel work units of ``per_unit`` spans."""
    per_unit = max(1, per_unit)
    return [list(spans[i : i + per_unit]) for i in range(0, len(spans), per_unit)]
