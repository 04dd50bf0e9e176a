"""Exception hierarchy shared by all modules."""


class HammersteinError(Exception):
    """Base class for every error raised by the package."""


class OrderOutOfRangeError(HammersteinError, ValueError):
    pass


class DomainMismatchError(HammersteinError, ValueError):
    pass


class ResourceLimitError(HammersteinError):
    pass


class HypothesisViolation(HammersteinError):
    """A kernel hypothesis fails on the data it was asked to certify."""


class NoValidXiError(HypothesisViolation):
    pass


class DegenerateMError(HammersteinError):
    pass


class IncompleteReportError(HammersteinError):
    pass


class ExpressionSyntaxError(HammersteinError, ValueError):
    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at offset {position}")


class UnknownIdentifierError(ExpressionSyntaxError):
    pass


class EvaluationDomainError(HammersteinError, ArithmeticError):
    def __init__(self, message: str, inputs: dict | None = None):
        self.inputs = inputs or {}
        detail = ", ".join(f"{k}={v!r}" for k, v in self.inputs.items())
        super().__init__(f"{message} ({detail})" if detail else message)


class DivergenceError(HammersteinError):
    """Picard iteration failed to converge; ``history`` holds step norms."""

    def __init__(self, message: str, history: list[float], iterations: int):
        self.history = history
        self.iterations = iterations
        super().__init__(message)


class ConfigError(HammersteinError, ValueError):
    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field {field!r}")
        if line:
            where.append(f"line {line}")
        super().__init__(f"{message} [{', '.join(where)}]" if where else message)
