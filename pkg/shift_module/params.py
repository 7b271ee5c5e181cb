"""
Parameters of the (alpha, beta)-transformation
Validation, alphabet size and the two arithmetic backends
"""

import math
import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Union

from shared_utils.errors import InvalidParam, UnsupportedRegime

Number = Union[Fraction, float]

_INTEGER = re.compile(r"^[+-]?\d+$")


class ArithmeticMode(Enum):
    EXACT = "exact-rational"
    TOLERANT = "tolerant-float"


def parse_number(value: Union[str, int, float, Fraction]) -> Number:
    """Parse `p/q` and integer strings exactly, decimals as floats"""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise InvalidParam(f"Not a number: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise InvalidParam(f"Not a finite number: {value!r}")
        return value

    text = str(value).strip()
    try:
        if "/" in text or _INTEGER.match(text):
            return Fraction(text)
        number = float(text)
    except (ValueError, ZeroDivisionError):
        raise InvalidParam(f"Not a number: {value!r}")
    if not math.isfinite(number):
        raise InvalidParam(f"Not a finite number: {value!r}")
    return number


@dataclass(frozen=True)
class Params:
    """The pair (alpha, beta) with derived alphabet size and arithmetic settings"""
    alpha: Number
    beta: Number
    k: int
    tol: float = 1e-12
    mode: ArithmeticMode = ArithmeticMode.TOLERANT

    @property
    def exact(self) -> bool:
        return self.mode is ArithmeticMode.EXACT

    def num(self, x) -> Number:
        """Coerce a value into this backend's number type"""
        if self.exact:
            return x if isinstance(x, Fraction) else Fraction(x)
        return float(x)

    def less(self, a: Number, b: Number) -> bool:
        """Strict a < b; in tolerant mode a must undercut b by more than tol"""
        if self.exact:
            return a < b
        return a < b - self.tol

    def same(self, a: Number, b: Number) -> bool:
        if self.exact:
            return a == b
        return abs(a - b) <= self.tol

    def describe(self) -> str:
        return f"alpha={self.alpha}, beta={self.beta}, k={self.k}, mode={self.mode.value}"


def _validate_pair(alpha: Number, beta: Number, tol: float) -> None:
    if not 0 <= alpha < 1:
        raise InvalidParam(f"alpha must lie in [0, 1), got {alpha}")
    limit = 2 if isinstance(beta, Fraction) else 2 + tol
    if beta <= limit:
        raise UnsupportedRegime(f"beta must exceed 2, got {beta}")


def derive_alphabet(alpha, beta, tol: float = 1e-12) -> int:
    """
    Smallest integer not less than alpha + beta.

    Args:
        alpha: Shift in [0, 1)
        beta: Slope > 2
        tol: Snapping tolerance for float input

    Returns:
        int: Alphabet size k
    """
    alpha, beta = parse_number(alpha), parse_number(beta)
    _validate_pair(alpha, beta, tol)

    total = alpha + beta
    if isinstance(total, Fraction):
        return math.ceil(total)
    nearest = round(total)
    if abs(total - nearest) <= tol:
        return int(nearest)
    return math.ceil(total)


def make_params(alpha, beta, tol: float = 1e-12) -> Params:
    """
    Build validated Params; exact mode when both inputs are rational.

    Args:
        alpha: Number or string (`p/q` activates exact arithmetic)
        beta: Number or string
        tol: Endpoint comparison tolerance for the float backend

    Returns:
        Params: Validated parameters
    """
    if not tol > 0:
        raise InvalidParam(f"tol must be positive, got {tol}")
    a, b = parse_number(alpha), parse_number(beta)
    k = derive_alphabet(a, b, tol)

    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return Params(alpha=a, beta=b, k=k, tol=tol, mode=ArithmeticMode.EXACT)
    return Params(alpha=float(a), beta=float(b), k=k, tol=tol, mode=ArithmeticMode.TOLERANT)
