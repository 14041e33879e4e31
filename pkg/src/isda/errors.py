class IsdaError(Exception):
    pass


class ContractViolation(IsdaError, ValueError):
    """A precondition of an operation was not met (shape, range, emptiness)."""


class DegenerateCovarianceError(IsdaError):
    """A covariance could not be factorized even after jitter retries."""


class ParseError(IsdaError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(IsdaError, ValueError):
    pass


class DivergenceError(IsdaError, FloatingPointError):
    def __init__(self, step, value):
        self.step = step
        self.value = value
        super().__init__(f"non-finite loss {value!r} at optimizer step {step}")
