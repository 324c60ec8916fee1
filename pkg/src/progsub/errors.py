"""Exception types shared across the package."""


class InputError(ValueError):
    """Caller-supplied values violate a documented precondition."""


class FormatError(ValueError):
    """An on-disk artifact is malformed, truncated, or version-incompatible."""


class NumericalError(RuntimeError):
    """A solve produced non-finite values or an unusably singular system."""


class PipelineError(RuntimeError):
    """A pipeline stage failed; carries the stage name for diagnostics."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
