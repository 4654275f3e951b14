from typing import List, Sequence


class SigVwapError(Exception):
    """Base class for every user-facing error raised by sigvwap."""


class DataError(SigVwapError, ValueError):
    pass


class GapError(DataError):
    def __init__(self, message: str, report: "object" = None):
        super().__init__(message)
        self.report = report


class ShapeError(SigVwapError, ValueError):
    pass


class ConfigError(SigVwapError, ValueError):
    def __init__(self, problems: Sequence[str]):
        self.problems: List[str] = list(problems)
        super().__init__(
            "invalid configuration:\n" + "\n".join(f"  - {p}" for p in self.problems)
        )


class CheckpointError(SigVwapError):
    pass


class DivergenceError(SigVwapError, FloatingPointError):
    pass
