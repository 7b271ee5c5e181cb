"""
Error Hierarchy
Every failure raised by the library, grouped by how the CLI reports it
"""

from typing import Optional


class AbShiftError(Exception):
    """Base class for all library errors"""


class ValidationError(AbShiftError, ValueError):
    """Bad input: parameters, words, measures or schedules (exit code 2)"""


class BudgetError(AbShiftError, RuntimeError):
    """A depth, size or iteration budget ran out (exit code 3)"""


# Validation family

class InvalidParam(ValidationError):
    pass


class UnsupportedRegime(ValidationError):
    """beta <= 2: the [2] self-loop connecting device is unavailable"""


class BoundaryError(ValidationError):
    """An orbit point landed on a partition endpoint"""

    def __init__(self, x, step: Optional[int] = None):
        self.x = x
        self.step = step
        where = f" at step {step}" if step is not None else ""
        super().__init__(f"Point {x} lies on a partition endpoint{where}")

    def at_step(self, step: int) -> "BoundaryError":
        return BoundaryError(self.x, step)


class Inadmissible(ValidationError):
    pass


class NotIrreducible(ValidationError):
    pass


class DepthTooLarge(ValidationError):
    pass


class SelectorOutOfRange(ValidationError):
    pass


class PrefixTooShort(ValidationError):
    pass


class ScheduleTooShort(ValidationError):
    pass


class EmptyTree(ValidationError):
    pass


# Budget family

class VertexBudgetExceeded(BudgetError):
    pass


class DepthInsufficient(BudgetError):
    """The built diagram is too shallow for the requested computation"""


class BudgetExceeded(BudgetError):
    pass


class CardinalityShortfall(BudgetError):
    pass


class NoConvergence(BudgetError):
    pass


class TargetUnreachable(BudgetError):
    pass
