"""Exception hierarchy shared by every krpool module."""


class KrpError(Exception):
    """Base class for all krpool errors."""


class FormatError(KrpError, ValueError):
    """Malformed input file (CSV, manifest, descriptor or model)."""


class DegenerateSequence(KrpError, ValueError):
    """Sequence too short or too constant to be pooled."""


class IoError(KrpError, OSError):
    """A referenced file is missing or unreadable."""


class ParamError(KrpError, ValueError):
    """Invalid hyper-parameter value."""


class ShapeError(KrpError, ValueError):
    """Array dimensions do not agree."""


class NumericalError(KrpError, ArithmeticError):
    """Factorization or eigen-solver failure."""


class KindError(KrpError, TypeError):
    """Descriptors of different kinds were mixed."""
