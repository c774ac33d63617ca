class InvalidInputError(ValueError):
    """Argument has the wrong shape, sign or range."""


class InvalidStateError(RuntimeError):
    """Operation is not defined for the current state (e.g. empty dataset)."""


class ProtocolError(RuntimeError):
    """Bandit draw/update calls did not alternate as required."""


class ConfigError(ValueError):
    """Experiment configuration is unusable; raised before any run starts."""


class NumericalError(ArithmeticError):
    """Cholesky factorisation failed even at the largest jitter."""

    def __init__(self, message, jitter=None):
        super().__init__(message)
        self.jitter = jitter


class ObjectiveError(RuntimeError):
    """Objective evaluation failed inside a strategy run."""

    def __init__(self, message, iteration):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration
