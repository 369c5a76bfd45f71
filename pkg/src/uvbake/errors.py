"""Exception hierarchy.

`ValidationError` marks bad user input (CLI exit status 1); everything else
deriving from `UvbakeError` is a runtime failure (exit status 2).
"""


class UvbakeError(Exception):
    pass


class ValidationError(UvbakeError, ValueError):
    pass


class MeshFormatError(UvbakeError, ValueError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{where}{message}")


class BehindCameraError(UvbakeError, ValueError):
    pass


class DegenerateError(UvbakeError, ValueError):
    pass


class EmptySetError(UvbakeError, ValueError):
    pass


class StageError(UvbakeError, RuntimeError):
    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage={stage}: {cause}")
