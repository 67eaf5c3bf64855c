import logging
import os
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import Callable, Iterator, List, Sequence, TypeVar

import numpy as np
from tqdm import tqdm

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def derive_seed(root: int, tag: str, *index: int) -> np.random.SeedSequence:
    """
    Derive an independent seed sequence for a purpose.

    The entropy is (root, crc32(tag), *index), so streams are stable across runs
    and platforms and never depend on global RNG state.

    :param root: Root seed of the run.
    :param tag: Purpose tag (eg. "instance", "reps").
    :param index: Integer indices (seed index, slice index, ...).
    :return: Seed sequence for the purpose.
    """
    entropy = [int(root), zlib.crc32(tag.encode("utf-8"))] + [int(i) for i in index]
    if any(e < 0 for e in entropy):
        raise ValueError(f"Seed components must be non-negative, got {entropy}")
    return np.random.SeedSequence(entropy)


def derive_rng(root: int, tag: str, *index: int) -> np.random.Generator:
    """
    Same as `derive_seed` but returns a ready generator.
    """
    return np.random.default_rng(derive_seed(root, tag, *index))


def resolve_workers(workers: int) -> int:
    """
    Number of workers to use. 0 means available parallelism.
    """
    if workers < 0:
        raise ValueError(f"Number of workers must be non-negative, got {workers}")
    if workers == 0:
        return os.cpu_count() or 1
    return workers


def ordered_map(
    func: Callable[[T], R],
    items: Sequence[T],
    workers: int = 1,
    desc: str = "",
    progress: bool = False,
) -> List[R]:
    """
    Map a function over items on a thread pool.
    Results are returned in input order regardless of completion order.

    :param func: Function to apply.
    :param items: Items to process.
    :param workers: Pool size (0 = available parallelism, 1 = run inline).
    :param desc: Progress bar description.
    :param progress: Whether to show a tqdm progress bar.
    :return: List of results in the order of the items.
    """
    workers = resolve_workers(workers)
    if workers == 1 or len(items) <= 1:
        iterator = tqdm(items, desc=desc, ncols=80, disable=not progress)
        return [func(item) for item in iterator]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(func, item) for item in items]
        iterator = tqdm(futures, desc=desc, ncols=80, disable=not progress)
        return [future.result() for future in iterator]


@contextmanager
def timed(name: str, store: dict) -> Iterator[None]:
    """
    Measure the wall time of a block into `store[name]` (seconds).
    """
    start = time.perf_counter()
    try:
        yield
    finally:
        elapsed = time.perf_counter() - start
        store[name] = elapsed
        logger.debug("%s took %.3fs", name, elapsed)
