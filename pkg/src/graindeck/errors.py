"""Exception types shared across the toolkit."""


class GraindeckError(Exception):
    """Base class for all toolkit errors."""


class LayoutError(GraindeckError):
    """A dataset directory does not match the expected on-disk layout."""


class PairingError(GraindeckError):
    """An image or mask file has no same-named partner."""


class ShapeMismatchError(GraindeckError):
    """Two arrays that must share a shape do not."""

    def __init__(self, shape_a, shape_b, context=""):
        self.shape_a = tuple(shape_a)
        self.shape_b = tuple(shape_b)
        msg = f"shape mismatch: {self.shape_a} vs {self.shape_b}"
        if context:
            msg = f"{context}: {msg}"
        super().__init__(msg)


class InsufficientClassError(GraindeckError):
    """A class has too few samples to be split."""


class CapacityError(GraindeckError):
    """Non-overlapping grain placement failed within the attempt budget."""


class DivergenceError(GraindeckError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, batch, loss_value):
        self.epoch = epoch
        self.batch = batch
        self.loss_value = loss_value
        super().__init__(
            f"non-finite training loss {loss_value!r} at epoch {epoch}, batch {batch}"
        )


class ConfigError(GraindeckError):
    """A configuration value violates its invariants."""
