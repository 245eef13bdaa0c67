"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class RsacError(Exception):
    exit_code = 1


class InputError(RsacError, ValueError):
    """Malformed or unusable input data."""

    exit_code = 2


class ConstructionError(RsacError):
    """No admissible estimator could be built."""

    exit_code = 3


class NumericError(RsacError, ArithmeticError):
    """A solver failed to converge or a numerical consistency check failed."""

    exit_code = 4
