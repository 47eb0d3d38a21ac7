"""Exception types raised across the package."""


class GraspError(Exception):
    """Base class for all package errors."""


class MalformedSpec(GraspError):
    """A hand specification document is structurally invalid."""


class UnknownLink(GraspError, KeyError):
    pass


class DegenerateInput(GraspError):
    """Point set spans fewer than three dimensions."""


class NonpositiveDimension(GraspError, ValueError):
    pass


class OutOfBounds(GraspError, ValueError):
    pass


class UnsupportedShape(GraspError):
    pass


class NoPermissiveOS(GraspError):
    """No opposition space can host the object at its minimum grasp distance."""


class NotPermissive(GraspError):
    pass


class NoFreeJoints(GraspError):
    pass


class Infeasible(GraspError):
    """Every restart of the local solver ended with constraint violation.

    ``best_violation`` holds the smallest maximum violation encountered.
    """

    def __init__(self, message, best_violation=float("inf")):
        super().__init__(message)
        self.best_violation = best_violation


class NoFeasibleGrasp(GraspError):
    pass


class TooManyPermutations(GraspError):
    pass


class ParseError(GraspError):
    pass


class ValidationError(GraspError, ValueError):
    """Scene validation failure; ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
