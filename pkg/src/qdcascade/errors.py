"""Exception hierarchy.

``InvalidArgument`` signals a caller error; everything under
``NumericalError`` is a failure of a computation on valid input.
"""


class InvalidArgument(ValueError):
    """Argument outside the domain of an operation."""


class NumericalError(RuntimeError):
    """A numerical procedure failed on otherwise valid input."""


class StiffnessError(NumericalError):
    """The adaptive step fell below the minimum allowed step."""


class IntegrationFailure(NumericalError):
    """State invariants were breached beyond tolerance during integration."""


class IncompleteDecayError(NumericalError):
    """The trajectory ends before the excited populations have decayed."""


class FitError(NumericalError):
    """A least-squares fit did not converge or is outside its domain."""


class FitDomainError(FitError):
    pass


class FitQualityError(FitError):
    pass


class CalibrationError(NumericalError):
    pass


class ModelMismatchError(NumericalError):
    pass
