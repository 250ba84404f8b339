"""Exception hierarchy shared across the package."""


class DstpError(Exception):
    """Base class for all package errors."""


class DimensionError(DstpError, ValueError):
    """Array shapes are incompatible for the requested operation."""


class ContractError(DstpError, ValueError):
    """A precondition of an operation was violated."""


class ConfigurationError(DstpError, ValueError):
    """A model, training or experiment configuration is invalid."""


class DataError(DstpError):
    """A dataset could not be loaded or prepared."""


class DivergenceError(DstpError, FloatingPointError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(f"loss became {loss!r} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch
        self.loss = loss


class UnsupportedOperationError(DstpError):
    """The operation does not apply to the given architecture."""
