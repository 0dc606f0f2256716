"""Exception hierarchy shared by every triwin module."""


class TriwinError(Exception):
    """Base class for all library errors."""


class ParseError(TriwinError, ValueError):
    def __init__(self, row, col, value=None):
        self.row = row
        self.col = col
        self.value = value
        super().__init__(f"cannot parse row {row}, column {col!r}: {value!r}")


class EmptyClass(TriwinError, ValueError):
    def __init__(self, which):
        self.which = which
        super().__init__(f"{which} class matches zero rows")


class InvalidDataset(TriwinError, ValueError):
    pass


class UnachievableIR(TriwinError, ValueError):
    pass


class TooFewSamples(TriwinError, ValueError):
    pass


class TooFewPositives(TriwinError, ValueError):
    pass


class KTooLarge(TriwinError, ValueError):
    pass


class DimensionMismatch(TriwinError, ValueError):
    pass


class NotSquare(TriwinError, ValueError):
    pass


class NotConverged(TriwinError, RuntimeError):
    def __init__(self, residual, message=None):
        self.residual = residual
        super().__init__(message or f"solver stopped with KKT residual {residual:.3e}")


class NotPositiveDefinite(TriwinError, ValueError):
    pass


class DegeneratePlane(TriwinError, RuntimeError):
    pass


class EmptyTestClass(TriwinError, ValueError):
    pass


class MissingEntry(TriwinError, ValueError):
    pass


class DegenerateDenominator(TriwinError, ZeroDivisionError):
    pass
