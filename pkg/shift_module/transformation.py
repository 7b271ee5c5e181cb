"""
The (alpha, beta)-transformation T(x) = beta*x + alpha (mod 1)
Branch partition, itineraries and one-sided kneading limits
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Sequence, Tuple

from shared_utils.errors import BoundaryError, InvalidParam
from shared_utils.helpers import format_value
from shift_module.params import Number, Params

Word = Tuple[int, ...]

EXACT_QUANTUM = Fraction(1, 2 ** 40)


@dataclass(frozen=True)
class OpenInterval:
    """The open interval (lo, hi) inside [0, 1]"""
    lo: Number
    hi: Number

    def __post_init__(self):
        if not self.lo < self.hi:
            raise InvalidParam(f"Empty interval ({self.lo}, {self.hi})")
        if self.lo < 0 or self.hi > 1:
            raise InvalidParam(f"Interval ({self.lo}, {self.hi}) leaves [0, 1]")

    @property
    def length(self) -> Number:
        return self.hi - self.lo

    def __str__(self) -> str:
        return f"({format_value(self.lo)}, {format_value(self.hi)})"


def format_word(word: Sequence[int]) -> str:
    return " ".join(str(s) for s in word)


def parse_word(text: str, k: int = 9) -> Word:
    """Parse "2 3 2", "2,3,2" or (for k <= 9) "232" into a word"""
    text = text.strip()
    if not text:
        return ()
    if any(sep in text for sep in (" ", ",")):
        parts = [p for p in text.replace(",", " ").split() if p]
    else:
        parts = list(text)
    try:
        word = tuple(int(p) for p in parts)
    except ValueError:
        raise InvalidParam(f"Not a word: {text!r}")
    validate_word(word, k)
    return word


def validate_word(word: Iterable[int], k: int) -> None:
    for symbol in word:
        if not 1 <= symbol <= k:
            raise InvalidParam(f"Symbol {symbol} outside alphabet 1..{k}")


def partition(params: Params) -> List[OpenInterval]:
    """I_j = ((j-1-alpha)/beta, min(1, (j-alpha)/beta)), with I_1 starting at 0"""
    intervals = []
    zero, one = params.num(0), params.num(1)
    for j in range(1, params.k + 1):
        lo = max(zero, (j - 1 - params.alpha) / params.beta)
        hi = min(one, (j - params.alpha) / params.beta)
        intervals.append(OpenInterval(params.num(lo), params.num(hi)))
    return intervals


def apply_map(x: Number, params: Params) -> Number:
    y = params.beta * params.num(x) + params.alpha
    return y - math.floor(y)


def branch_image(lo: Number, hi: Number, j: int, params: Params) -> Tuple[Number, Number]:
    """Affine image of [lo, hi] under branch j: x -> beta*x + alpha - (j-1)"""
    shift = params.alpha - (j - 1)
    return params.beta * lo + shift, params.beta * hi + shift


def branch_index(x: Number, params: Params) -> int:
    """The j with x in I_j; BoundaryError on (or within tol of) an endpoint"""
    x = params.num(x)
    for j, interval in enumerate(partition(params), start=1):
        if params.same(x, interval.lo) or params.same(x, interval.hi):
            raise BoundaryError(x)
        if interval.lo < x < interval.hi:
            return j
    raise BoundaryError(x)


def itinerary(x: Number, n: int, params: Params) -> Word:
    """Symbols of the first n orbit points; the error records the 1-based step"""
    if n < 1:
        raise InvalidParam(f"n must be >= 1, got {n}")
    symbols = []
    point = params.num(x)
    for step in range(1, n + 1):
        try:
            symbols.append(branch_index(point, params))
        except BoundaryError as e:
            raise e.at_step(step) from None
        point = apply_map(point, params)
    return tuple(symbols)


def orbit(x: Number, n: int, params: Params) -> List[Number]:
    """x, Tx, ..., T^n x"""
    points = [params.num(x)]
    for _ in range(n):
        points.append(apply_map(points[-1], params))
    return points


def nudge(x: Number, params: Params) -> Number:
    """Offset x by one quantum (just past the tolerance band)"""
    if params.exact:
        return params.num(x) + EXACT_QUANTUM
    return float(x) + 2 * params.tol


def _one_sided_branch(v: Number, side: int, params: Params) -> int:
    """Branch holding v+ (side=+1) or v- (side=-1)"""
    for j, interval in enumerate(partition(params), start=1):
        if side > 0:
            inside = not params.less(v, interval.lo) and params.less(v, interval.hi)
        else:
            inside = params.less(interval.lo, v) and not params.less(interval.hi, v)
        if inside:
            return j
    raise InvalidParam(f"One-sided limit {v} ({'+' if side > 0 else '-'}) outside [0, 1]")


def _snap(y: Number, params: Params) -> Number:
    if params.exact:
        return y
    if abs(y) <= params.tol:
        return 0.0
    if abs(y - 1) <= params.tol:
        return 1.0
    return y


def one_sided_itinerary(v: Number, side: int, n: int, params: Params) -> Word:
    """
    Itinerary of the one-sided limit v+ or v-.

    The limit is pushed through the affine branch holding it, never through
    the mod-1 map, so endpoints are never evaluated as points.
    """
    symbols = []
    point = params.num(v)
    for _ in range(n):
        j = _one_sided_branch(point, side, params)
        symbols.append(j)
        point = _snap(branch_image(point, point, j, params)[0], params)
    return tuple(symbols)


def kneading_limits(params: Params, n: int) -> Tuple[Word, Word]:
    """Itineraries of 0+ and 1-"""
    if n < 1:
        raise InvalidParam(f"n must be >= 1, got {n}")
    return (one_sided_itinerary(params.num(0), +1, n, params),
            one_sided_itinerary(params.num(1), -1, n, params))
