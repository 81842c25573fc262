"""Exception types shared across the package."""

from __future__ import annotations


class NumericalFailure(RuntimeError):
    """An integration or solver failed; ``state`` holds the last good data."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class StepUnderflow(NumericalFailure):
    pass


class DomainExit(NumericalFailure):
    pass


class DegenerateHypothesis(RuntimeError):
    """A nondegeneracy assumption (non-conjugate endpoints) fails."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
