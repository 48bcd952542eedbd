"""Exception types shared across the package."""


class UsageError(ValueError):
    """A documented precondition was violated (bad shape, bad config value)."""


class SingularSystemError(RuntimeError):
    """A linear system was numerically singular or not positive definite."""


class ParseError(ValueError):
    """A data or config file could not be parsed."""


class DivergenceError(RuntimeError):
    """An iterative solver produced non-finite or unbounded iterates."""

    def __init__(self, message, iteration=None, agent=None):
        super().__init__(message)
        self.iteration = iteration
        self.agent = agent
