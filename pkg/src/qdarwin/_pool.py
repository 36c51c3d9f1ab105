"""Process-pool map with deterministic result order."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def resolve_workers(workers) -> int:
    if workers is None or int(workers) <= 0:
        return os.cpu_count() or 1
    return int(workers)


def ordered_map(fn, tasks, workers: int = 1) -> list:
    """``[fn(t) for t in tasks]``, optionally spread over processes.

    Results come back in task order, so reductions over them are
    bit-identical regardless of ``workers``.
    """
    tasks = list(tasks)
    workers = min(resolve_workers(workers), max(len(tasks), 1))
    if workers == 1:
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks, chunksize=chunk))
