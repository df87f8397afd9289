"""Exception types raised across the package."""


class CisimError(Exception):
    """Base class for all package errors."""


class CIPointError(CisimError, ValueError):
    """Mixing angle or its gradient requested at the conical intersection."""


class NoConvergenceError(CisimError):
    """A Newton search failed; ``seed`` holds the starting point."""

    def __init__(self, message, seed=None):
        super().__init__(message)
        self.seed = seed


class InvalidGridError(CisimError, ValueError):
    pass


class CIOnGridError(CisimError, ValueError):
    """A grid node or link passes through the conical intersection."""


class GridMismatchError(CisimError, ValueError):
    pass


class NotConvergedError(CisimError):
    """Iterative eigensolver did not converge; ``residuals`` are the best found."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class GroupTooLargeError(CisimError, ValueError):
    pass


class NoInflectionError(CisimError):
    pass


class SpectralRangeError(CisimError):
    pass


class TolUnreachableError(CisimError):
    pass


class ConfigError(CisimError, ValueError):
    """Bad configuration; ``key`` and ``line`` locate the problem when known."""

    def __init__(self, message, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key={key!r}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.key = key
        self.line = line
