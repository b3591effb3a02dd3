"""Exception hierarchy.

``HypothesisError`` subclasses mark violated mathematical preconditions
(CLI exit code 3); ``SearchBudgetError`` marks exhausted search budgets
(exit code 4).
"""


class FrameError(ValueError):
    """Base class for all framedisc errors."""


class InvalidInputError(FrameError):
    pass


class ShapeError(FrameError):
    pass


class InvalidRangeError(FrameError):
    pass


class InvalidWeightError(FrameError):
    pass


class HypothesisError(FrameError):
    """A precondition of the underlying theorem does not hold."""


class DomainError(HypothesisError):
    pass


class NotAFrameError(HypothesisError):
    pass


class NotBesselError(HypothesisError):
    pass


class AtomicityError(HypothesisError):
    """Fractional selection requested on an atomic (indivisible) cell."""


class IrreducibleCellError(HypothesisError):
    """An atom whose vector varies more than the requested accuracy."""


class AdmissibilityError(HypothesisError):
    pass


class RefinementLimitError(FrameError):
    pass


class DiscretizationTooCoarseError(FrameError):
    def __init__(self, message, suggested_epsilon=None):
        super().__init__(message)
        self.suggested_epsilon = suggested_epsilon


class SearchBudgetError(FrameError):
    pass


class SearchFailure(FrameError):
    """A partition search found no assignment meeting its targets.

    ``certificate`` holds the best attempt; ``partial`` any blocks already
    produced by a recursive caller.
    """

    def __init__(self, message, certificate=None, partial=None):
        super().__init__(message)
        self.certificate = certificate
        self.partial = partial
