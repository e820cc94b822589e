"""Exception types shared across the package.

Everything raised on bad instances or bad model state derives from
TruncIsingError so the CLI can map the whole family to one exit code.
"""


class TruncIsingError(Exception):
    """Base class for instance/model errors."""


class DimacsError(TruncIsingError):
    """Malformed DIMACS CNF input. Carries a 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class GraphFileError(TruncIsingError):
    """Malformed graph edge-list file."""


class SampleFileError(TruncIsingError):
    """Malformed spin-configuration file."""


class EmptySupportError(TruncIsingError):
    """The formula has no satisfying assignment: the measure is undefined."""


class SampleNotInSupportError(TruncIsingError):
    """A provided configuration does not satisfy the formula."""


class DegenerateObjectiveError(TruncIsingError):
    """The pseudolikelihood carries no information about beta.

    Raised when no coordinate is flippable, or every flippable coordinate
    has zero magnetization: the objective is constant in beta.
    """


class InfeasibleInstanceError(TruncIsingError):
    """Requested generator parameters admit no instance (or retries ran out)."""
