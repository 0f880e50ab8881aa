"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 2,
DataError -> 3, DivergenceError -> 4, OS-level I/O errors -> 5.
"""


class ScgirError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(ScgirError):
    """Operand shapes are incompatible for the requested operation."""


class BatchTooSmallError(ScgirError):
    """An operation needing batch statistics got fewer than 2 rows."""


class ContractError(ScgirError):
    """An input violates a documented precondition (e.g. non-scalar loss,
    unstandardized latents, zero-power symbol vector)."""


class StateError(ScgirError):
    """An object was used in an order its lifecycle forbids (e.g. a second
    backward pass on a tape that was not reset)."""


class UnsupportedModeError(ScgirError):
    """A configuration selects a mode the implementation does not provide
    (e.g. equalization without receiver channel knowledge)."""


class ConfigError(ScgirError):
    """A configuration file or value is invalid."""


class DataError(ScgirError):
    """A dataset could not be loaded or generated consistently."""


class DataFormatError(DataError):
    """A binary input file (IDX, checkpoint) is malformed."""


class DivergenceError(ScgirError):
    """Training produced a non-finite loss; carries a diagnostic record."""

    def __init__(self, message, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic
