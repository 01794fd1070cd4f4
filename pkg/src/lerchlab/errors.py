"""Exception hierarchy shared across the package."""

from __future__ import annotations


class LerchLabError(Exception):
    """Base class for all package errors."""


class DomainError(LerchLabError, ValueError):
    """Input outside the mathematical domain of an operation."""


class CapacityError(LerchLabError):
    """Requested size exceeds the configured memory or work budget."""


class NotFoundError(LerchLabError):
    """A search finished without a result."""


class InvariantError(LerchLabError):
    """An internal consistency check failed."""


class NumericalGuardError(LerchLabError):
    """A numerical safety guard tripped."""


class BoundaryZeroError(NumericalGuardError):
    """A contour passes too close to a zero of the evaluated function."""

    def __init__(self, message: str, point: complex | None = None, edge: int | None = None):
        super().__init__(message)
        self.point = point
        self.edge = edge


class DenominatorTooSmallError(NumericalGuardError):
    pass


class ImageError(NumericalGuardError):
    """Target point not reachable by the two-angle map."""


class RadiusViolationError(NumericalGuardError):
    pass


class InfeasibleConstructionError(LerchLabError):
    """No admissible parameter choice passes the feasibility checks."""

    def __init__(self, message: str, margins: list | None = None):
        super().__init__(message)
        self.margins = margins or []
