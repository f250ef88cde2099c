"""Exception hierarchy shared by every module.

Each exception carries a ``category`` used by the command-line tool to pick
its exit code: ``config`` -> 2, ``data`` -> 3, ``numeric`` -> 4.
"""


class GafAdvError(Exception):
    category = "data"


class ConfigError(GafAdvError, ValueError):
    category = "config"


class DegenerateSeries(GafAdvError, ValueError):
    """Series has zero range, so min-max scaling is undefined."""


class DomainError(GafAdvError, ValueError):
    """Value outside the domain of arccos / diagonal inversion."""


class DegenerateWindow(GafAdvError, ValueError):
    """Trend segment has zero mean bar range."""


class AmbiguousMatch(GafAdvError):
    def __init__(self, labels):
        self.labels = tuple(labels)
        names = ", ".join(label.name for label in self.labels)
        super().__init__(f"window satisfies several pattern rules: {names}")


class GenerationFailed(GafAdvError):
    pass


class DatasetFormatError(GafAdvError, ValueError):
    pass


class ParseError(GafAdvError, ValueError):
    def __init__(self, row, column, reason):
        self.row, self.column, self.reason = row, column, reason
        super().__init__(f"row {row}, column {column!r}: {reason}")


class InvariantError(GafAdvError, ValueError):
    def __init__(self, row, reason):
        self.row, self.reason = row, reason
        super().__init__(f"row {row}: {reason}")


class EmptyClass(GafAdvError, ValueError):
    pass


class InsufficientAdversarial(GafAdvError, ValueError):
    def __init__(self, label, needed, available):
        self.label, self.needed, self.available = int(label), needed, available
        super().__init__(
            f"class {self.label}: need {needed} adversarial items, only {available} available"
        )


class NonFiniteActivation(GafAdvError, FloatingPointError):
    category = "numeric"


class ZeroVariance(GafAdvError, ValueError):
    category = "numeric"
