"""Exception hierarchy shared by all modules."""


class FeedbackMZError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(FeedbackMZError, ValueError):
    """An argument is outside its allowed domain."""


class ValidationError(FeedbackMZError, ValueError):
    """A structured object (matrix, device, plan) violates an invariant."""


class NumericalError(FeedbackMZError, ArithmeticError):
    """A numerical routine failed to reach its requested accuracy."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class DegenerateInputError(NumericalError):
    """Input is degenerate for the requested quantity (e.g. a zero matrix)."""


class ConfigError(FeedbackMZError):
    """A scenario document could not be parsed or validated.

    ``errors`` holds ``(line, message)`` pairs; ``line`` is 1-based or None.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        lines = []
        for line, msg in self.errors:
            lines.append(f"line {line}: {msg}" if line is not None else msg)
        super().__init__("\n".join(lines))
