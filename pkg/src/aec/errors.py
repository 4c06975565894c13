"""Exception types shared across the package."""


class AecError(Exception):
    """Base class for errors raised by this package."""


class DecodeError(AecError):
    """A file could not be parsed (bad WAV, embedding, manifest, or model file)."""


class SilentClipError(AecError):
    """Every measurement frame of a clip fell below the silence threshold."""


class ConvergenceError(AecError):
    """An iterative solver failed to converge or diverged."""

    def __init__(self, message, residual=None, epoch=None):
        super().__init__(message)
        self.residual = residual
        self.epoch = epoch
