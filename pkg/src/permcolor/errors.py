"""Exception types shared across the package."""


class PermColorError(Exception):
    """Base class for all errors raised by permcolor."""


class InvalidParameter(PermColorError, ValueError):
    pass


class PreconditionViolation(PermColorError, ValueError):
    pass


class NotAForest(PermColorError, ValueError):
    pass


class BudgetExhausted(PermColorError, RuntimeError):
    """The search hit its node limit before reaching a verdict."""


class CapExceeded(PermColorError, RuntimeError):
    """The requested enumeration is larger than the configured cap."""


class NoSignChange(PermColorError, RuntimeError):
    pass
