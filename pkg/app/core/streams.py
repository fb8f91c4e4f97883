"""
Random-stream derivation and replicate execution.

Every trial owns one SeedSequence. Accrual, outcomes and each interim
analysis get their own child keyed by position, so the interim at clock
index t can be replayed from (seed, t) alone and adding scenarios never
perturbs existing replicates.
"""
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, TypeVar, Union

import numpy as np

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

SeedLike = Union[int, np.random.SeedSequence]

ACCRUAL_KEY = 0
OUTCOME_KEY = 1
INTERIM_KEY = 2


def as_seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


def child(seed: SeedLike, *key: int) -> np.random.SeedSequence:
    """Deterministic child without touching the parent's spawn counter."""
    root = as_seed_sequence(seed)
    return np.random.SeedSequence(root.entropy, spawn_key=tuple(root.spawn_key) + tuple(key))


def replicate_seed(master: int, scenario: int, replicate: int) -> np.random.SeedSequence:
    """Stream for replicate `replicate` of scenario `scenario` under a master seed."""
    return child(master, scenario, replicate)


def interim_rng(seed: SeedLike, index: int) -> np.random.Generator:
    """Generator for the interim analysis at clock index `index` (1-based months)."""
    return np.random.default_rng(child(seed, INTERIM_KEY, index))


@dataclass
class TrialStreams:
    seed: np.random.SeedSequence
    accrual: np.random.Generator
    outcomes: np.random.Generator

    def interim(self, index: int) -> np.random.Generator:
        return interim_rng(self.seed, index)


def trial_streams(seed: SeedLike) -> TrialStreams:
    root = as_seed_sequence(seed)
    return TrialStreams(
        seed=root,
        accrual=np.random.default_rng(child(root, ACCRUAL_KEY)),
        outcomes=np.random.default_rng(child(root, OUTCOME_KEY)),
    )


# ---------------------------------------------------------------------------
# Replicate execution
# ---------------------------------------------------------------------------


def default_workers() -> int:
    """Worker count from DEINTENSIFY_WORKERS (default 1)."""
    raw = os.getenv("DEINTENSIFY_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        logger.warning("Ignoring DEINTENSIFY_WORKERS=%r (not an integer)", raw)
        return 1


def parallel_map(
    fn: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None
) -> List[R]:
    """Map fn over items in input order, across processes when workers > 1.

    fn must be picklable (a module-level function or a functools.partial of one).
    Results depend only on the items, never on the worker count.
    """
    items = list(items)
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    chunksize = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items, chunksize=chunksize))
