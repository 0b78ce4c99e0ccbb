"""Exception types shared across the package."""


class EntropicError(Exception):
    """Base class for all package errors."""


class NonConvexInput(EntropicError):
    pass


class EmptyDomain(EntropicError):
    pass


class GridNotSymmetric(EntropicError):
    pass


class NonPositiveEntry(EntropicError):
    pass


class NoConvergence(EntropicError):
    pass


class Asymmetric(EntropicError):
    pass


class TailBoundMissing(EntropicError):
    pass


class StencilOutsideDomain(EntropicError):
    pass


class OffShell(EntropicError):
    """Phase point violates the kinetic-energy constraint."""


class ParameterOutOfRange(EntropicError):
    pass


class NotInOBeta(EntropicError):
    """beta*h - k(X) is not positive definite."""


class NoLimit(EntropicError):
    pass


class OutsideStrip(EntropicError):
    pass


class SeriesDiverges(EntropicError):
    pass


class NoDetailedBalanceAtZero(EntropicError):
    pass


class FDStepTooLarge(EntropicError):
    pass


class InsufficientSymmetricMass(EntropicError):
    pass


class ConfigInvalid(EntropicError):
    pass


class CheckFailed(EntropicError):
    pass
