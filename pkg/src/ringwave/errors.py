"""Exception hierarchy.

Validation problems (bad inputs, violated preconditions) derive from
``ValidationError``; failures of a numerical procedure that was given
valid input derive from ``NumericalError``.  The CLI maps the two
families to distinct exit codes.
"""


class RingwaveError(Exception):
    pass


class ValidationError(RingwaveError, ValueError):
    pass


class DomainError(ValidationError):
    """An argument lies outside the domain of the operation."""


class SingularityError(DomainError):
    """Kernel evaluated at coincident points."""


class FormatError(ValidationError):
    """Malformed or incompatible field file."""


class NumericalError(RingwaveError, RuntimeError):
    pass


class InfeasibleError(NumericalError):
    """No admissible multipliers exist for the requested impulse."""


class ConvergenceError(NumericalError):
    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class ResolutionError(NumericalError):
    """The requested problem is under-resolved on the given grid."""


class SupportError(NumericalError):
    """A field's support reached the edge of the computational box."""
