"""Exception hierarchy shared by every module of the package."""


class ASADGError(Exception):
    """Base class for all errors raised by :mod:`asadg`."""


class DimensionMismatch(ASADGError, ValueError):
    pass


class InvalidParams(ASADGError, ValueError):
    pass


class NonFiniteResult(ASADGError, ArithmeticError):
    """The marched solution overflowed or produced NaN."""


class SolverToleranceExceeded(ASADGError):
    """A freshly solved output failed the manifold membership test."""


class DimensionTooLarge(ASADGError, ValueError):
    pass


class BudgetExceeded(ASADGError, ValueError):
    pass


class DegenerateInput(ASADGError, ValueError):
    """Fewer than three distinct points, or all points collinear."""


class EmbeddingCollision(ASADGError, ValueError):
    pass


class FormatError(ASADGError, ValueError):
    pass


class NonFiniteLoss(ASADGError, ArithmeticError):
    """Training diverged; usually the learning rate is too high."""


class EmptyTestSet(ASADGError, ValueError):
    pass


class ConfigError(ASADGError, ValueError):
    pass


class IndexOutOfRange(ASADGError, IndexError):
    pass


class IoFailure(ASADGError, OSError):
    pass
