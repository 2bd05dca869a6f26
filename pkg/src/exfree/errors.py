"""Exception types shared across the package."""


class ExfreeError(Exception):
    """Base class for all package errors."""


class DimensionError(ExfreeError):
    """Invalid or inconsistent Hilbert-space dimensions."""


class TruncationError(ExfreeError):
    """Requested occupation exceeds the Fock truncation."""


class InvalidParameterError(ExfreeError):
    """Physical parameter outside its allowed range."""


class InvalidOperatorError(ExfreeError):
    """Operator fails a structural requirement (hermiticity, idempotence)."""


class RegimeError(ExfreeError):
    """Parameters outside the oscillatory regime delta > 2*sqrt(2)*g.

    Below that threshold a quantum phase transition occurs and the
    closed-form solutions do not apply.
    """


class ConvergenceError(ExfreeError):
    """An iterative numerical procedure failed to converge."""


class ImpossibleOutcomeError(ExfreeError):
    """A conditional operation has (numerically) zero success probability."""
