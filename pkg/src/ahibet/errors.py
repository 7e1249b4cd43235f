"""Exception types shared across the package."""


class AhibetError(Exception):
    """Base class for all library errors."""


class ShapeError(AhibetError, ValueError):
    """Dimension or modulus mismatch between operands."""


class SolveError(AhibetError, ValueError):
    """A linear system is inconsistent, rank-deficient, or singular."""


class NonIntegralError(SolveError):
    """An exact integer solve produced a non-integer solution.

    In decryption this signals that the noise violated its bound.
    """


class IntegerOverflowError(AhibetError, ArithmeticError):
    """A product would exceed the checked 64-bit integer envelope."""


class PreconditionError(AhibetError, ValueError):
    """A documented operation precondition does not hold."""


class ParameterError(AhibetError, ValueError):
    """A parameter set is invalid or infeasible."""


class DecryptionReject(AhibetError):
    """Internal marker for the rejection outcome; not raised across the API."""
