# SPDX-License-Identifier: MIT

from enum import Enum


class OrderTag(Enum):
    """Order in epsilon at which a transformed term first appears."""

    ZEROTH = 0
    FIRST = 1
    SECOND = 2


class TermKind(Enum):
    """Structure of a retained dissipator group."""

    LINDBLAD = "lindblad"
    CROSS_TERM = "non_lindblad_cross_term"


class EngineError(Exception):
    """Base class for engine errors."""

    def __init__(self, message: str):
        self.message: str = message
        super().__init__(self.message)


class InvalidDimensionError(EngineError):
    """A space was requested with an illegal dimension."""


class FactorTypeError(EngineError):
    """An operator was requested on the wrong kind of tensor factor."""


class DimensionMismatchError(EngineError):
    """Operands live on different spaces or have incompatible shapes."""


class NonFiniteError(EngineError):
    """A matrix or parameter contains NaN or infinity."""


class NonCommutingError(EngineError):
    """An operator does not commute with the integral of motion."""

    def __init__(self, message: str, commutator_norm: float):
        super().__init__(message)
        self.commutator_norm: float = commutator_norm


class ExtractionError(EngineError):
    """Polynomial extraction failed on a block."""

    def __init__(self, message: str, n_value: float | None = None):
        super().__init__(message)
        self.n_value: float | None = n_value


class ExtractionRequiredError(EngineError):
    """An operation needs the structure polynomial, which has not been extracted."""


class NonUnitaryError(EngineError):
    """A rotation matrix failed the unitarity check."""


class DegenerateDetuningError(EngineError):
    """The detuning is zero, so epsilon = g / Delta is undefined."""


class InvalidStateError(EngineError):
    """A density matrix violates trace, Hermiticity, positivity or support."""


class InvariantViolationError(EngineError):
    """Integration aborted because a sampled state broke a density-matrix invariant."""

    def __init__(self, message: str, time: float, residual: float):
        super().__init__(message)
        self.time: float = time
        self.residual: float = residual


class StabilityGuardError(EngineError):
    """The requested step size is too large for the generator norm."""

    def __init__(self, message: str, suggested_dt: float):
        super().__init__(message)
        self.suggested_dt: float = suggested_dt


class SuperoperatorSizeError(EngineError):
    """A dense superoperator would exceed the size guard."""


class ConfigError(EngineError):
    """The run configuration could not be parsed or validated."""


class EngineWarning(UserWarning):
    """Soft numerical condition worth reporting."""


class DispersiveGuardWarning(EngineWarning):
    """The dispersive-limit condition is not satisfied with margin."""
