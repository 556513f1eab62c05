"""Exception types raised across the package."""


class GlideOptError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(GlideOptError, ValueError):
    pass


class OutOfDomain(GlideOptError, ValueError):
    pass


class PreconditionViolated(GlideOptError, ValueError):
    pass


class InvalidConfig(GlideOptError, ValueError):
    pass


class UnknownInstance(GlideOptError, KeyError):
    pass


class MissingParameter(GlideOptError, ValueError):
    pass


class MissingEvaluator(GlideOptError, ValueError):
    pass


class ZeroVector(GlideOptError, ValueError):
    pass


class EmptyRun(GlideOptError, ValueError):
    pass


class ZeroSubgradient(GlideOptError, ArithmeticError):
    """A normalized step-size rule received a zero subgradient (x is optimal)."""


class ProjectionNonconvergence(GlideOptError, ArithmeticError):
    pass


class BracketFailure(GlideOptError, ArithmeticError):
    pass
