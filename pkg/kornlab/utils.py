"""Module with environment and randomness utilities."""
import os
from typing import Optional

import numpy as np

__all__ = (
    "get_worker_count",
    "make_rng",
)


def get_worker_count(requested: Optional[int] = None) -> int:
    """Number of worker threads for independent runs.

    The ``KORNLAB_THREADS`` environment variable caps the count.

    Parameters
    ----------
    requested : int, optional
        Number of workers the caller could use at most, e.g. the number of starts.

    Returns
    -------
    workers : int
        At least 1.
    """
    if requested is not None and requested < 1:
        raise ValueError(f"requested must be ≥ 1, got {requested}.")
    limit = os.cpu_count() or 1
    env = os.environ.get("KORNLAB_THREADS")
    if env:
        try:
            limit = int(env)
        except ValueError:
            raise ValueError(f"KORNLAB_THREADS must be a positive integer, got '{env}'.")
        if limit < 1:
            raise ValueError(f"KORNLAB_THREADS must be a positive integer, got '{env}'.")
    if requested is not None:
        limit = min(limit, requested)
    return limit


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """A PCG64 generator for the given seed and (optional) stream indices.

    Distinct stream indices give statistically independent generators,
    so results do not depend on the order in which parallel work is scheduled.
    """
    return np.random.default_rng([seed, *stream])

