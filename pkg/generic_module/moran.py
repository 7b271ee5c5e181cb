"""
Moran prefix system: generic-point prefixes, Birkhoff checkpoints, prefix counting
"""

import logging
import math
import random
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Union

from diagram_module.connecting import connector_word
from diagram_module.markov_diagram import DPath, Diagram
from generic_module.schedule import Schedule
from measure_module.cylinder_measures import (CylinderMeasure, distance_to_profile, empirical_measure_of_word,
                                              measure_profile, profile_gap)
from shared_utils.errors import InvalidParam, PrefixTooShort, SelectorOutOfRange
from shift_module.transformation import Word

logger = logging.getLogger(__name__)

Selector = Union[int, Sequence[int]]


@dataclass(frozen=True)
class GenericPrefix:
    word: Word
    path: DPath
    indices: tuple
    checkpoints: tuple
    seed: Optional[int] = None

    def __len__(self) -> int:
        return len(self.word)


@dataclass(frozen=True)
class Checkpoint:
    k: int
    n: int
    N: int
    segment_deviation: float
    cumulative_deviation: float
    bound: float

    @property
    def within_bound(self) -> bool:
        return self.segment_deviation <= self.bound

    def to_dict(self) -> Dict:
        return {"k": self.k, "n": self.n, "N": self.N, "segment_deviation": self.segment_deviation,
                "cumulative_deviation": self.cumulative_deviation, "bound": self.bound,
                "within_bound": self.within_bound}


@dataclass(frozen=True)
class PrefixCount:
    k: int
    count: int
    exponent: float
    target: float

    @property
    def meets_target(self) -> bool:
        return self.exponent >= self.target


def _levels(schedule: Schedule, k_levels: Optional[int]) -> int:
    total = len(schedule.expanded)
    k_levels = total if k_levels is None else k_levels
    if not 1 <= k_levels <= total:
        raise InvalidParam(f"Schedule has {total} inner levels, asked for {k_levels}")
    return k_levels


def _indices(schedule: Schedule, choice: Selector, k_levels: int) -> List[int]:
    if isinstance(choice, int):
        rng = random.Random(choice)
        return [rng.randrange(schedule.gamma(k).count) for k in range(1, k_levels + 2)
                if k <= len(schedule.expanded)]
    indices = list(choice)
    if len(indices) < k_levels:
        raise SelectorOutOfRange(f"Selector has {len(indices)} entries, need {k_levels}")
    for k, index in enumerate(indices[:k_levels + 1], start=1):
        if k > len(schedule.expanded):
            break
        if not 0 <= index < schedule.gamma(k).count:
            raise SelectorOutOfRange(f"Index {index} outside Gamma'_{k} of size {schedule.gamma(k).count}")
    return indices[:k_levels + 1]


def generic_prefix(schedule: Schedule, choice: Selector, k_levels: Optional[int],
                   diagram: Diagram) -> GenericPrefix:
    """
    w^1 c^1 w^2 c^2 ... w^K c^K with w^k in Gamma'_k and c^k of length t_k.

    The connector c^k joins the path end of w^k to the path start of w^(k+1);
    after the last selected word it leads to the smallest start vertex of the
    next Gamma set (Gamma'_K itself at the end of the schedule). The prefix has
    length N_K.

    Args:
        schedule: Expanded schedule
        choice: Seed, or one Gamma'_k index per level (an extra index picks w^(K+1))
        k_levels: Number of inner levels K (default: all)
        diagram: Diagram for connectors

    Returns:
        GenericPrefix: word, realizing path and selected indices
    """
    k_levels = _levels(schedule, k_levels)
    indices = _indices(schedule, choice, k_levels)
    word: List[int] = []
    path: List[int] = []
    picked = [schedule.gamma(k).word_path(indices[k - 1]) for k in range(1, k_levels + 1)]
    for k, (w, p) in enumerate(picked, start=1):
        level = schedule.expanded[k - 1]
        if k < k_levels:
            target = picked[k][1][0]
        elif k < len(schedule.expanded) and len(indices) > k:
            target = schedule.gamma(k + 1).word_path(indices[k])[1][0]
        else:
            following = schedule.gamma(min(k + 1, len(schedule.expanded)))
            target = following.start_vertices[0]
        labels, interior = connector_word(p[-1], target, level.t, diagram)
        word.extend(w)
        word.extend(labels)
        path.extend(p)
        path.extend(interior)
    checkpoints = tuple(level.N for level in schedule.expanded[:k_levels])
    logger.info(f"Generic prefix of length {len(word)} through level {k_levels}")
    return GenericPrefix(tuple(word), tuple(path), tuple(indices[:k_levels]), checkpoints,
                         choice if isinstance(choice, int) else None)


def birkhoff_check(prefix: Sequence[int], mu: CylinderMeasure, schedule: Schedule, M: int,
                   k_levels: Optional[int] = None) -> List[Checkpoint]:
    """
    Deviations from mu at every checkpoint N_k.

    The segment deviation uses the n_k symbols from N_(k-1); the cumulative one
    the whole prefix up to N_k, whose window counts grow incrementally.
    Bound: 3 eps'_k + (M - 1) / n_k.
    """
    prefix = tuple(prefix)
    k_levels = _levels(schedule, k_levels)
    if len(prefix) < schedule.expanded[k_levels - 1].N:
        raise PrefixTooShort(f"Prefix of length {len(prefix)} ends before N_{k_levels}="
                             f"{schedule.expanded[k_levels - 1].N}")
    profile = measure_profile(mu, M)
    k = mu.k
    windows = [Counter() for _ in range(M)]
    counted = [0] * M
    records = []
    start = 0
    for level in schedule.expanded[:k_levels]:
        segment = empirical_measure_of_word(prefix[start:level.N], M, k)
        for m in range(1, M + 1):
            last = level.N - m + 1
            windows[m - 1].update(prefix[i:i + m] for i in range(counted[m - 1], last))
            counted[m - 1] = last
        cumulative = [{w: c / counted[m] for w, c in windows[m].items()} for m in range(M)]
        bound = 3 * schedule.block_of(level).eps + (M - 1) / level.n
        records.append(Checkpoint(level.k, level.n, level.N, distance_to_profile(profile, segment),
                                  profile_gap(profile, cumulative), bound))
        start = level.N
    flagged = [r.k for r in records if not r.within_bound]
    if flagged:
        logger.warning(f"Checkpoint deviations above bound at levels {flagged}")
    return records


def count_prefixes(schedule: Schedule, k: int) -> PrefixCount:
    """prod_{j<=k} #Gamma'_j, its exponent log(count)/N_k and the target (h - 2 eps)/(1 + eps)"""
    k = _levels(schedule, k)
    count = 1
    for level in schedule.expanded[:k]:
        count *= schedule.block_of(level).count
    N = schedule.expanded[k - 1].N
    exponent = math.log(count) / N if count > 0 else -math.inf
    eps = schedule.epsilon
    return PrefixCount(k, count, exponent, (schedule.h_mu - 2 * eps) / (1 + eps))


def generic_prefix_counts(schedule: Schedule, k_levels: Optional[int] = None,
                          inner_depths: bool = True) -> Dict[int, int]:
    """
    Upper bounds on distinct generic prefixes, by depth.

    At N_k: the connector after w^k depends only on its endpoints, so the words
    number at most prod_{j<=k} #Gamma'_j times the start vertices of the
    following Gamma set. With inner_depths the middle of every w^k is added:
    the count at N_(k-1) times Gamma'_k.prefix_count(l'_k // 2).
    """
    k_levels = _levels(schedule, k_levels)
    counts: Dict[int, int] = {}
    product = 1
    total = len(schedule.expanded)
    previous_N = 0
    previous_count = 1
    for level in schedule.expanded[:k_levels]:
        gamma = schedule.block_of(level).gamma
        if inner_depths and level.l >= 2:
            counts[previous_N + level.l // 2] = previous_count * gamma.prefix_count(level.l // 2)
        product *= gamma.count
        following = schedule.gamma(min(level.k + 1, total))
        counts[level.N] = product * max(1, len(following.start_vertices))
        previous_N, previous_count = level.N, counts[level.N]
    return counts
