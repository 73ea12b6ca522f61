"""Exceptions raised by the workbench."""

from typing import Optional, Sequence, Tuple


class KacbenchError(Exception):
    """Base class for all errors raised by kacbench."""


class ArgumentError(KacbenchError, ValueError):
    """An argument does not fit the other arguments (e.g. elements of different groups)."""


class IndexRangeError(KacbenchError, IndexError):
    """Enumeration index outside of the (finite) group."""


class PreconditionError(KacbenchError, ValueError):
    """An operation was called on inputs violating its preconditions."""


class NoReturnError(PreconditionError):
    """The orbit of a point on a finite system never meets the target set."""

    def __init__(self, point: int, msg: Optional[str] = None):
        super().__init__(msg or f"orbit of point {point} does not intersect the target")
        self.point = point


class InvalidAllocationError(PreconditionError):
    """An allocation moved a point outside of its target set."""


class AbstentionError(KacbenchError, RuntimeError):
    """The evaluation budget was exhausted before an answer was certain."""

    def __init__(self, msg: str, budget: Optional[int] = None):
        super().__init__(msg)
        self.budget = budget


class InfiniteCellError(AbstentionError):
    """A cell could not be certified finite within the budget."""


class EstimationError(AbstentionError):
    """Too many Monte Carlo evaluations abstained to certify an identity."""

    def __init__(self, msg: str, fraction: float, threshold: float):
        super().__init__(msg)
        self.fraction = fraction
        self.threshold = threshold


class InconclusiveError(KacbenchError, RuntimeError):
    """A geometric check cannot decide with the available data (e.g. unbounded cell)."""

    def __init__(self, msg: str, directions: Sequence[Tuple[int, ...]] = ()):
        super().__init__(msg)
        self.directions = list(directions)


class UnsupportedError(KacbenchError, NotImplementedError):
    """Input is outside of what the workbench implements (dimension, non-ergodic, ...)."""


class InternalConsistencyError(KacbenchError, RuntimeError):
    """A theorem-backed internal invariant failed. Indicates a corrupt input or a bug."""
