"""Exception types shared across the package."""


class KlausError(Exception):
    """Base class for all package errors."""


class NoPerfectMatching(KlausError, ValueError):
    """Raised when a graph with an odd number of vertices is asked for matchings."""


class ZeroState(KlausError):
    """Every coloring weight vanished; nothing survives post-selection."""


class ShapeError(KlausError, ValueError):
    """Two states (or a state and a graph) disagree on party count or dimension."""


class ParseError(KlausError, ValueError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsatisfiableByConstruction(KlausError):
    """A support coloring admits no matching at all, so the formula is constant False."""

    def __init__(self, coloring):
        self.coloring = tuple(coloring)
        super().__init__(f"coloring {self.coloring} has no compatible perfect matching")


class IncompleteAssignment(KlausError, KeyError):
    def __init__(self, var):
        self.var = var
        super().__init__(f"variable {var} is not assigned")


class InvalidAssumptions(KlausError, ValueError):
    pass


class BudgetExceeded(KlausError):
    """The solver hit its conflict or time limit before reaching a decision."""


class InfeasibleTarget(KlausError):
    """The feasibility formula is unsatisfiable, so no graph can produce the target."""
