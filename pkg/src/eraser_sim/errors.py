"""Exception vocabulary shared across the package."""


class InvalidParameterError(ValueError):
    """An argument is outside its documented domain."""


class ContractViolationError(RuntimeError):
    """A documented precondition between collaborating objects was broken."""


class TruncationError(RuntimeError):
    """Photon-number cutoff leakage exceeded the tolerated bound."""


class UndefinedVisibilityError(ValueError):
    """Visibility is undefined because max + min of the samples is zero."""
