"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


class DomainError(ValueError):
    """An argument lies outside the operation's domain (empty, non-finite, ...)."""


class SequenceLengthError(ValueError):
    """Sequence longer than a fixed position-embedding table supports."""


class TrainingError(RuntimeError):
    """Training produced a non-finite loss.

    ``last_finite_loss`` and ``step`` record the last step whose loss was finite.
    """

    def __init__(self, message, step, last_finite_loss):
        super().__init__(message)
        self.step = step
        self.last_finite_loss = last_finite_loss
