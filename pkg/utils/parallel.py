# utils/parallel.py
import logging
from concurrent.futures import ProcessPoolExecutor

logger = logging.getLogger(__name__)


def ordered_map(func, items, threads=1):
    """
    Apply func to every item and return results in input order

    mpmath keeps its working precision in a process-global context, so parallel
    work runs in separate processes rather than threads. Results never depend on
    the worker count.

    Args:
        func (callable): Picklable top-level function
        items (iterable): Arguments, one per call
        threads (int): Worker count; 1 or less runs in-process

    Returns:
        list: func(item) for each item, in order
    """
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    workers = min(threads, len(items))
    logger.debug(f"Dispatching {len(items)} tasks to {workers} worker processes")
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
