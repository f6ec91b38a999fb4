"""Exception types raised by the calibration library."""


class AdvcalError(ValueError):
    """Base class for all errors raised by advcal."""


class InvalidPriorError(AdvcalError):
    pass


class InvalidArgumentError(AdvcalError):
    pass


class EmptyWindowError(AdvcalError):
    """The window mass does not exceed the target mass (q <= p)."""


class NoStationaryPointError(AdvcalError):
    pass


class OutOfDomainError(AdvcalError):
    pass


class UndefinedOutputError(AdvcalError):
    """Every input has zero likelihood for the observed output."""
