"""Exception hierarchy shared by every qcnet module."""


class QcnError(Exception):
    """Base class for all library errors."""


class DimensionError(QcnError, ValueError):
    """Shapes or factor dimensions do not line up."""


class NotHermitianError(QcnError, ValueError):
    pass


class InvalidStateError(QcnError, ValueError):
    """A matrix failed the density-operator checks (PSD, trace)."""


class InvalidOperationError(QcnError, ValueError):
    """A Kraus list or projection set failed its structural checks."""


class DimensionCapError(QcnError):
    pass


class InvalidSagError(QcnError):
    """The graph is not a sequenced association graph."""

    def __init__(self, message, violation=None):
        super().__init__(message)
        self.violation = violation


class NetworkError(QcnError):
    """A local distribution or network violates a semantic condition."""


class InterventionError(QcnError):
    """An intervention cannot be applied to the given network."""


class NumericError(QcnError):
    """A numeric procedure produced no admissible answer."""


class ZeroProbabilityError(NumericError):
    """Conditioning on an outcome whose Born probability is (numerically) zero."""


class ParseError(QcnError):
    """Syntax or reference error in a model or script file."""

    def __init__(self, message, line=0, column=0):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class SemanticError(QcnError):
    """A parsed model is not a valid network; ``issues`` lists every problem
    as ``(line, column, message)``."""

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("\n".join(f"line {l}, column {c}: {m}" for l, c, m in self.issues))
