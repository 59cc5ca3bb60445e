"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid configuration: bad dimensions, ranges, or parameter ordering."""


class ScenarioError(ConfigurationError):
    """A scenario file failed to parse or validate."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DivergenceError(RuntimeError):
    """A rollout produced a non-finite state."""


class SingularGradientError(ValueError):
    """Barrier gradient requested exactly at an obstacle center."""


class HypothesisViolationError(ValueError):
    """A construction's standing hypothesis does not hold for these parameters."""


class NoCertificateError(ValueError):
    """No decay certificate exists for the requested gains."""
