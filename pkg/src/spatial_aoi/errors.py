"""Exception types shared across the package."""


class UsageError(ValueError):
    """Invalid arguments or inputs (CLI exit code 2)."""


class ConvergenceError(RuntimeError):
    """A solver failed to converge.

    ``trace`` holds the per-iteration residual (or spread) history so the
    caller can see how far the iteration got.
    """

    def __init__(self, message, trace=None, report=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []
        self.report = report
