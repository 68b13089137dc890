"""Exception hierarchy. Each family maps to a distinct CLI exit code."""


class ScanGapError(Exception):
    exit_code = 1


class ValidationError(ScanGapError, ValueError):
    """Input data violates a data-model invariant (non-finite coordinate, bad lengths...)."""

    exit_code = 4


class FormatError(ScanGapError, ValueError):
    """A file could not be parsed or written in the requested format."""

    exit_code = 4

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class PreconditionError(ScanGapError, ValueError):
    """An operation was called outside its domain (empty cloud, size mismatch, bad parameter)."""

    exit_code = 5


class EmptyCloudError(PreconditionError):
    pass


class DegenerateCloudError(PreconditionError):
    pass


class RegistrationDiverged(ScanGapError, RuntimeError):
    exit_code = 6

    def __init__(self, iteration: int, message: str = "ICP lost all inlier correspondences"):
        super().__init__(f"{message} at iteration {iteration}")
        self.iteration = iteration
