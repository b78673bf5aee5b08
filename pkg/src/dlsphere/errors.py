"""Exception hierarchy shared by all modules.

Every error raised on bad input derives from ``DLSphereError`` so callers
(the CLI in particular) can map families of failures to exit codes.
"""


class DLSphereError(Exception):
    """Base class for package errors."""


class ParameterError(DLSphereError, ValueError):
    """An argument is outside its documented domain."""


class ContractViolation(DLSphereError, ValueError):
    """A precondition on the structure of an input does not hold."""


class OutOfChartError(ContractViolation):
    """A point lies outside the reparameterization chart Gamma."""


class SingularInputError(DLSphereError, ArithmeticError):
    """A matrix that must be invertible is (numerically) singular."""


class DegenerateInputError(DLSphereError, ValueError):
    """An input is degenerate for the requested operation (e.g. all zeros)."""


class DiagnosticUnavailable(DLSphereError):
    """A diagnostic cannot be computed for the given inputs."""


class UnsupportedDimension(ParameterError):
    """The operation is only defined for a specific dimension."""


class NumericalFailure(DLSphereError, ArithmeticError):
    """A computation produced non-finite values.

    ``trace`` carries whatever iteration history was collected before the
    failure, so it can be inspected or serialized.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class PartialResultError(DLSphereError):
    """Fewer results were produced than requested.

    ``results`` holds what was found; ``report`` optionally holds a partial
    higher-level report.
    """

    def __init__(self, message, results=None, report=None):
        super().__init__(message)
        self.results = list(results) if results is not None else []
        self.report = report


class RecoveryFailure(DLSphereError, ArithmeticError):
    """The recovered coefficient matrix is rank deficient."""


class ParseError(DLSphereError, ValueError):
    """A file could not be parsed. ``offset`` is the byte offset of the problem."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset
