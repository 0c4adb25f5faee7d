"""Keyword subset sampling for instruction evolution.

Each seed gets a plan of keyword subsets up front; one subset conditions
each evolution step. Small tag sets are sampled with replenishment (the
full set is available to every draw), large ones are partitioned into
disjoint subsets until the pool or the draw budget runs out.
"""

import random
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import EmptyKeywordSet
from .seeds import dedup_keywords


@dataclass(frozen=True)
class SamplerConfig:
    """Bounds for subset sampling: sizes in [r_min, r_max], at most t_max draws."""

    r_min: int = 1
    r_max: int = 3
    t_max: int = 5

    def __post_init__(self):
        if self.r_min < 1:
            raise ValueError("r_min must be at least 1")
        if self.r_max < self.r_min:
            raise ValueError("r_max must be at least r_min")
        if self.t_max < 1:
            raise ValueError("t_max must be at least 1")


@dataclass(frozen=True)
class KeywordSubsetPlan:
    """Ordered subsets to condition evolution on, plus pool exhaustion state."""

    subsets: tuple[tuple[str, ...], ...]
    exhausted: bool


def sample_subsets(
    tags: Iterable[str],
    config: SamplerConfig,
    rng: random.Random,
) -> KeywordSubsetPlan:
    """Draw a subset plan from a tag set.

    With m = len(tags) <= r_max the pool replenishes between draws: exactly
    t_max subsets are returned and repeats across draws are permitted. With
    m > r_max each draw removes its tags from the pool, so subsets are
    disjoint; once the remainder is smaller than r_min the whole remainder
    becomes the final subset. ``exhausted`` is true only when the pool ran
    dry before the draw budget did.
    """
    pool = list(dedup_keywords(tags))
    if not pool:
        raise EmptyKeywordSet("cannot sample subsets from an empty tag set")
    m = len(pool)

    if m <= config.r_max:
        hi = min(m, config.r_max)
        lo = min(config.r_min, hi)
        subsets = []
        for _ in range(config.t_max):
            size = rng.randint(lo, hi)
            subsets.append(tuple(rng.sample(pool, size)))
        return KeywordSubsetPlan(tuple(subsets), exhausted=False)

    remaining = list(pool)
    subsets = []
    for _ in range(config.t_max):
        if not remaining:
            break
        if len(remaining) < config.r_min:
            # remainder rule: too few tags left for a full draw
            subsets.append(tuple(remaining))
            remaining = []
            break
        hi = min(len(remaining), config.r_max)
        size = rng.randint(config.r_min, hi)
        chosen = rng.sample(remaining, size)
        subsets.append(tuple(chosen))
        taken = set(chosen)
        remaining = [t for t in remaining if t not in taken]
    exhausted = not remaining and len(subsets) < config.t_max
    return KeywordSubsetPlan(tuple(subsets), exhausted)


def select_for_simplification(tags: Sequence[str], rng: random.Random) -> tuple[str, ...]:
    """Pick the tags to keep when asking for a simpler instruction.

    A proper nonempty subset is drawn uniformly by size; a single-tag set
    is returned unchanged since it has no proper subset to shrink to.
    """
    pool = list(dedup_keywords(tags))
    if not pool:
        raise EmptyKeywordSet("cannot select retained tags from an empty tag set")
    if len(pool) == 1:
        return tuple(pool)
    size = rng.randint(1, len(pool) - 1)
    return tuple(rng.sample(pool, size))
