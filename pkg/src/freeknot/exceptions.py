"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class OutOfRangeError(ValueError):
    """A requested interval is not covered by the sampled path."""


class NumericFailure(ArithmeticError):
    """A numerical routine failed; ``best`` carries the best iterate, if any."""

    def __init__(self, message, best=None, step=None):
        super().__init__(message)
        self.best = best
        self.step = step


class ConfigError(ValueError):
    """Invalid run configuration (CLI exit status 2)."""
