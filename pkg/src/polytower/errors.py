"""Exception types shared across the package."""


class PolytowerError(Exception):
    """Base class for all library errors."""


class NotPrime(PolytowerError):
    pass


class ShapeMismatch(PolytowerError):
    pass


class LimitExceeded(PolytowerError):
    """Domain too large for exhaustive enumeration."""


class CharacteristicTooSmall(PolytowerError):
    """Degree d >= p where division by d! (or similar) is needed."""


class FlavorMismatch(PolytowerError):
    pass


class IndexOutOfRange(PolytowerError):
    pass


class AcceptanceTooLow(PolytowerError):
    """Rejection sampler would accept too rarely to be useful."""


class SystemTooLarge(PolytowerError):
    pass


class BudgetOverflow(PolytowerError):
    """A budget schedule entry exceeded 2^63."""


class IterationCapExceeded(PolytowerError):
    pass


class ParseError(PolytowerError):
    pass
