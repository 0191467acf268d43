from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

import numpy as np

__version__ = "0.1.0"

THREADS_ENV = "RAPID_THREADS"
"""Environment variable consulted when no explicit thread count is given."""

_T = TypeVar("_T")
_R = TypeVar("_R")


class RapidError(Exception):
    """
    Base class for every error raised by rapidrisk.
    """


class ConfigurationError(RapidError):
    """
    Raised when parameters, thresholds or flags are invalid. The CLI exits with
    code 2 on these.
    """


class DataError(RapidError):
    """
    Raised when input data cannot be used as given. The CLI exits with code 3 on
    these.
    """


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """
    Builds an independent random Generator for a (seed, stream) pair.

    Args:
        seed (int): The user-facing seed.
        *stream (int): Any number of non-negative integers identifying the
            stream (tree index, replicate number, fold, ...).

    Returns:
        np.random.Generator: A PCG64 generator whose draws depend only on the
        seed and the stream key.

    """
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(seq))


def derive_seed(seed: int, *stream: int) -> int:
    """
    Args:
        seed (int): The user-facing seed.
        *stream (int): The stream key.

    Returns:
        int: A 32-bit seed derived deterministically from seed and stream,
        for handing to code that takes a plain integer seed.

    """
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream))
    return int(seq.generate_state(1)[0])


def resolve_threads(threads: int | None = None) -> int:
    """
    Args:
        threads (int, optional): An explicit thread count. Defaults to None, in
            which case RAPID_THREADS is read, falling back to the cpu count.

    Returns:
        int: A positive thread count.

    """
    if threads is None:
        env = os.getenv(THREADS_ENV)
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise ConfigurationError(f"{THREADS_ENV}={env!r} is not an integer.")
        else:
            threads = os.cpu_count() or 1
    if threads < 1:
        raise ConfigurationError(f"Thread count must be >= 1, got {threads}.")
    return threads


def parallel_map(
    fn: Callable[[_T], _R], items: Iterable[_T], threads: int | None = None
) -> List[_R]:
    """
    Applies fn to every item, possibly across threads. Results keep the order of
    items, so callers that derive their randomness from the item itself get the
    same output for any thread count.

    Args:
        fn (Callable[[_T], _R]): The function to apply.
        items (Iterable[_T]): The inputs.
        threads (int, optional): Thread count, see resolve_threads.

    Returns:
        List[_R]: fn(item) for each item, in input order.

    """
    work = list(items)
    n_threads = min(resolve_threads(threads), max(len(work), 1))
    if n_threads == 1:
        return [fn(item) for item in work]
    with ThreadPoolExecutor(max_workers=n_threads) as ex:
        return list(ex.map(fn, work))
