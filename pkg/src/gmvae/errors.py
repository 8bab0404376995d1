"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain of a geometric or statistical map."""


class ConstraintViolationError(DomainError):
    """A point or tangent vector violates its manifold constraint."""


class FormatError(ValueError):
    """A binary file does not have the expected layout or magic number."""


class TruncationError(FormatError):
    """A binary buffer is shorter than its header promises."""


class CheckpointError(RuntimeError):
    """A checkpoint cannot be read back into the requested model."""


class ConfigError(ValueError):
    """A run configuration is missing keys, has unknown keys or bad values."""


class TrainingAborted(RuntimeError):
    """Training hit a non-finite loss or activation.

    ``diagnostics`` carries the epoch, step and offending quantities so the
    caller can report them; the last good checkpoint is left untouched.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
