class ValidationError(ValueError):
    """Raised when an input violates a documented precondition."""


class EdgeListParseError(ValidationError):
    def __init__(self, lineno: int, line: str, reason: str = "expected 'src dst'"):
        self.lineno = lineno
        self.line = line
        super().__init__(f"line {lineno}: {reason}: {line!r}")


class EnumerationCapError(RuntimeError):
    """Raised by the brute-force oracles when the search space is too large."""


class QPConvergenceError(RuntimeError):
    def __init__(self, message: str, gap: float, violation: float):
        self.gap = gap
        self.violation = violation
        super().__init__(f"{message} (gap={gap:.3e}, violation={violation:.3e})")
