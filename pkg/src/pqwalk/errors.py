"""Exception types raised across the package."""


class WalkError(Exception):
    """Base class for all package errors."""


class NormalizationError(WalkError, ValueError):
    """Initial spinor is not normalized."""


class BoundaryOverflowError(WalkError, RuntimeError):
    """A shift would move amplitude past the lattice edge (array too small)."""


class DomainError(WalkError, ValueError):
    """Argument outside the domain of the operation."""


class ResourceError(WalkError, RuntimeError):
    """Request too large for a brute-force routine."""


class ContractError(WalkError, ValueError):
    """Input violates a documented precondition."""


class NumericalContractError(WalkError, ArithmeticError):
    """A numerical invariant (unitarity, eigenvalue range) was violated."""


class DataError(WalkError, ValueError):
    """Data unsuitable for the requested analysis."""
