"""Exception types shared across the package."""


class WarpdiffError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(WarpdiffError, ValueError):
    """An argument violates a documented precondition."""


class FormatError(WarpdiffError, ValueError):
    """An on-disk container is malformed (bad magic, truncated payload, ...)."""


class SingularScheduleError(WarpdiffError, ValueError):
    """A diffusion schedule value makes the requested projection undefined."""
