"""

This module runs independent check items on a bounded thread pool.


numpy and scipy release the GIL inside their kernels, so threads give real
parallelism for the dense linear algebra behind every item. Results come back
in submission order, which keeps every reduction deterministic.
"""

import logging
from concurrent.futures import ThreadPoolExecutor

from hardyscope.config import Config

logger = logging.getLogger(__name__)


def worker_count(requested=None):
    """Number of workers: `requested` capped by HARDYSCOPE_THREADS, at least 1."""
    if requested is None:
        return Config.THREADS
    return max(1, min(int(requested), Config.THREADS))


def map_ordered(func, items, workers=None):
    """

    Apply `func` to every item, possibly in parallel, preserving order.


    Args:
        func (callable): Pure function of one item.
        items (iterable): Work items.
        workers (int, optional): Requested pool size.

    Returns:
        list: func(item) for every item, in input order.
    """
    items = list(items)
    count = min(worker_count(workers), max(1, len(items)))
    if count == 1:
        return [func(item) for item in items]
    logger.debug("Running %d items on %d threads", len(items), count)
    with ThreadPoolExecutor(max_workers=count) as executor:
        return list(executor.map(func, items))
