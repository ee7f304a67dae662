class DifformerError(Exception):
    """Base class for every error the registration pipeline raises on purpose."""


class ShapeError(DifformerError):
    pass


class NonFiniteError(DifformerError):
    pass


class CloudFormatError(DifformerError):
    """Malformed point-cloud, pose or dataset file."""

    def __init__(self, message, path=None, offset=None):
        self.path = path
        self.offset = offset
        location = ""
        if path is not None:
            location = f" ({path}"
            location += f" at byte {offset})" if offset is not None else ")"
        super().__init__(f"{message}{location}")


class InvalidTransformError(DifformerError):
    pass


class DegenerateInputError(DifformerError):
    """Too few points, collinear support, isolated node or disconnected graph."""


class ConvergenceError(DifformerError):
    pass


class ConfigError(DifformerError):
    pass


class ModelFileError(DifformerError):
    pass


class TrainingError(DifformerError):
    def __init__(self, message, epoch=None, pair_id=None):
        self.epoch = epoch
        self.pair_id = pair_id
        super().__init__(f"{message} (epoch {epoch}, pair {pair_id})")
