"""Exception hierarchy shared by every qlab module."""


class QLabError(Exception):
    """Base class for all qlab errors."""


class ZeroSeries(QLabError, ZeroDivisionError):
    pass


class DivergentProduct(QLabError):
    pass


class TermSyntaxError(QLabError, ValueError):
    """Malformed term text; ``offset`` is the byte offset of the problem."""

    def __init__(self, message, offset=None, text=None):
        self.offset = offset
        self.text = text
        where = "" if offset is None else f" at offset {offset}"
        super().__init__(f"{message}{where}")


class SemanticsError(QLabError, ValueError):
    pass


class ZeroDenominator(QLabError, ZeroDivisionError):
    pass


class OutOfFragment(QLabError):
    pass


class NonConvergent(QLabError):
    pass


class NonSummable(QLabError):
    pass


class NonStabilizing(QLabError):
    pass


class NoLimitError(QLabError):
    pass


class UnknownSeries(QLabError, KeyError):
    pass


class UnregisteredDecomposition(QLabError, KeyError):
    pass


class NonVanishing(QLabError):
    pass


class UnknownFamily(QLabError, KeyError):
    pass


class ZeroInverse(QLabError, ZeroDivisionError):
    pass


class OutOfDisk(QLabError, ValueError):
    pass


class NotUnary(QLabError, ValueError):
    pass


class UnknownIdentity(QLabError, KeyError):
    pass
