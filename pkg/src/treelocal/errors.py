"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class CapacityError(RuntimeError):
    """The request is too large (or the data too thin) to be served."""


class NoMaximizerError(DomainError):
    """A local-time field vanishes identically on the leaves."""
