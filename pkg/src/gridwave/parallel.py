"""Ordered fan-out of independent tasks.

Results come back in input order whatever the worker count, so runs with
``jobs=1`` and ``jobs=4`` produce the same reports::

    from gridwave.parallel import ordered_map

    reports = ordered_map(lambda g: search_violation(g, cfg, 800, 0), grids, jobs=4)

Workers are threads. Tasks may read shared grids and layouts but must not
mutate them.
"""

from __future__ import annotations

import logging
from typing import Callable, Iterable, TypeVar

from joblib import Parallel, delayed

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def check_jobs(jobs: int) -> int:
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")
    return jobs


def ordered_map(fn: Callable[[T], R], items: Iterable[T], jobs: int = 1) -> list[R]:
    """``[fn(item) for item in items]`` on up to *jobs* workers.

    Raises:
        ValueError: If ``jobs < 1``.
    """
    check_jobs(jobs)
    work = list(items)
    if jobs == 1 or len(work) <= 1:
        return [fn(item) for item in work]
    n_jobs = min(jobs, len(work))
    logger.debug("running %d tasks on %d workers", len(work), n_jobs)
    results: list[R] = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(fn)(item) for item in work
    )
    return results
