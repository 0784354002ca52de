"""Exception hierarchy shared by the library and the command line.

Each class carries the process exit code the CLI maps it to.
"""


class TwoPhaseError(Exception):
    exit_code = 2


class ValidationError(TwoPhaseError, ValueError):
    """Invalid parameters: design sizes, transforms, correlation targets."""

    exit_code = 1


class DataError(TwoPhaseError, ValueError):
    """Input data that cannot be parsed or that leaves a quantity undefined."""

    exit_code = 2


class DegenerateSampleError(DataError, ZeroDivisionError):
    """An estimator denominator is zero for the realized sample."""


class NumericGuardError(TwoPhaseError, RuntimeError):
    """Combinatorial explosion or a rejection rate above the allowed ceiling."""

    exit_code = 3
