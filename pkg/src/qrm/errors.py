class QRMError(Exception):
    """Base class for all errors raised by this package."""


class GridError(QRMError, ValueError):
    """Invalid grid dimension, target size or coordinate."""


class KernelError(QRMError, ValueError):
    """Mismatched line / command / mask lengths."""


class MergeError(QRMError, ValueError):
    """Commands from different (iteration, axis, scan index) groups were mixed."""


class MoveError(QRMError):
    """A tweezer move was applied although it violates the hardware constraints."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class LoweringError(QRMError):
    """A merged move could not be split into valid tweezer moves."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class CodecError(QRMError, ValueError):
    """Malformed packet stream or schedule file."""


class ScheduleError(QRMError):
    """A schedule does not fit the grid it is replayed on."""
