"""Ordered work distribution over worker processes."""

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Iterator, Optional, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(threads: Optional[int]) -> int:
    "Worker count, None or 0 meaning all cores"
    if not threads:
        return os.cpu_count() or 1
    if threads < 0:
        raise ValueError(f"Number of threads cannot be negative, got {threads}")
    return threads


def ordered_map(func: Callable[[T], R], tasks: Iterable[T], threads: Optional[int]=1, chunksize: int=1) -> Iterator[R]:
    """Apply a function to tasks, yielding results in task order

    With a single worker the tasks run in the calling process.
    Otherwise they are spread over a process pool; results are
    still yielded in submission order so that any reduction
    over them is independent of scheduling.

    Parameters
    ----------
    func : callable
        Picklable, module-level function
    tasks : iterable
        Picklable arguments, one per call
    threads : int, optional
        Number of worker processes
    """
    n_workers = resolve_threads(threads)
    if n_workers == 1:
        for task in tasks:
            yield func(task)
        return
    logger.debug("Starting a pool of %d workers", n_workers)
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        yield from pool.map(func, tasks, chunksize=chunksize)
