from __future__ import annotations


class ConfigError(ValueError):
    """Invalid experiment configuration, or an acquisition missing the surrogate it needs."""


class NumericalError(ArithmeticError):
    def __init__(self, message: str, *, jitter_levels: tuple[float, ...] = ()):
        super().__init__(message)
        self.jitter_levels = jitter_levels


class ParseError(ValueError):
    def __init__(self, message: str, *, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ProblemEvaluationError(RuntimeError):
    pass
