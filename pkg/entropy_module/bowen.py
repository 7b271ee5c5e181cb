"""
Bowen entropy estimators on prefix trees
With d(x, y) = 2^-(t-1), t the first disagreeing coordinate, the Bowen ball
B_n(x, 2^-m) is the cylinder on the first n + m - 1 coordinates of x.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union

from shared_utils.errors import EmptyTree, InvalidParam, ScheduleTooShort
from shift_module.transformation import Word

logger = logging.getLogger(__name__)

GRID_SLACK = 1e-9


def bowen_ball_depth(n: int, m: int) -> int:
    if n < 1 or m < 1:
        raise InvalidParam(f"Need n, m >= 1, got n={n}, m={m}")
    return n + m - 1


@dataclass(frozen=True)
class BowenCover:
    """Cylinders over words, each a Bowen ball of length ball_length at scale 2^-m"""
    words: Tuple[Word, ...]
    ball_length: int
    m: int

    def __post_init__(self):
        if self.ball_length < 1:
            raise InvalidParam(f"Bowen-ball length must be >= 1, got {self.ball_length}")

    def cost(self, s: float) -> float:
        """sum over the cover of exp(-s n_i)"""
        return len(self.words) * math.exp(-s * self.ball_length)


@dataclass(frozen=True)
class EntropyEstimate:
    lower: float
    upper: float
    method: str = ""

    def __post_init__(self):
        if self.lower > self.upper + GRID_SLACK:
            raise InvalidParam(f"Lower estimate {self.lower} exceeds upper {self.upper}")

    def brackets(self, h: float, tol: float = 0.0) -> bool:
        return self.lower - tol <= h <= self.upper + tol


def prefix_counts(words: Iterable[Sequence[int]]) -> Dict[int, int]:
    """Depth -> number of distinct prefixes of that length"""
    prefixes: Dict[int, set] = {}
    for w in words:
        w = tuple(w)
        for d in range(1, len(w) + 1):
            prefixes.setdefault(d, set()).add(w[:d])
    return {d: len(p) for d, p in sorted(prefixes.items())}


def uniform_cover(words: Iterable[Sequence[int]], depth: int, m: int) -> BowenCover:
    """All distinct depth-`depth` prefixes, as Bowen balls of length depth - m + 1"""
    cylinders = sorted({tuple(w)[:depth] for w in words if len(w) >= depth})
    if not cylinders:
        raise EmptyTree(f"No word reaches depth {depth}")
    return BowenCover(tuple(cylinders), depth - m + 1, m)


def _snap_up(value: float, s_step: float) -> float:
    if value <= 0:
        return 0.0
    return math.ceil(value / s_step - GRID_SLACK) * s_step


def bowen_upper(tree: Union[Iterable[Sequence[int]], Mapping[int, int]], m: int = 1,
                s_step: float = 0.01, n_min: Optional[int] = None) -> float:
    """
    Smallest grid value s with a uniform-depth cover of cost <= 1.

    Args:
        tree: Words (closed under prefixes or not) or a depth -> count mapping
        m: Scale, epsilon = 2^-m
        s_step: Grid resolution
        n_min: Smallest cover depth considered; defaults to half the deepest depth

    Returns:
        float: Upper estimate of h_top(sigma, Z, 2^-m) on the s grid
    """
    counts = dict(tree) if isinstance(tree, Mapping) else prefix_counts(tree)
    counts = {d: c for d, c in counts.items() if c > 0}
    if not counts:
        raise EmptyTree("Prefix tree is empty")
    if m < 1 or s_step <= 0:
        raise InvalidParam(f"Need m >= 1 and s_step > 0, got m={m}, s_step={s_step}")
    deepest = max(counts)
    floor = max(deepest // 2 if n_min is None else n_min, m)
    eligible = {d: c for d, c in counts.items() if d >= floor}
    if not eligible:
        raise EmptyTree(f"No tree depth at or beyond {floor} (deepest {deepest})")

    best_depth, best = min(((d, math.log(c) / (d - m + 1)) for d, c in eligible.items()),
                           key=lambda pair: (pair[1], pair[0]))
    logger.debug(f"Uniform cover at depth {best_depth} gives critical exponent {best:.6f}")
    return _snap_up(best, s_step)


def bowen_lower_moran(schedule, k_max: int, m: int = 1) -> float:
    """
    min over checkpoints k <= k_max of log(prod_{j<=k} #Gamma'_j) / (N_k + m - 1).

    schedule: anything with moran_levels() -> [(n_k, #Gamma'_k), ...], or that list itself
    """
    levels = schedule.moran_levels() if hasattr(schedule, "moran_levels") else list(schedule)
    if k_max < 1 or k_max > len(levels):
        raise ScheduleTooShort(f"Schedule has {len(levels)} levels, need {k_max}")
    if m < 1:
        raise InvalidParam(f"Scale must be >= 1, got {m}")
    N, log_count, best = 0, 0.0, math.inf
    for n_k, count_k in levels[:k_max]:
        if count_k < 1:
            raise EmptyTree("Moran level without words")
        N += n_k
        log_count += math.log(count_k)
        best = min(best, log_count / (N + m - 1))
    return best
