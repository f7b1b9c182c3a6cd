"""Exception hierarchy shared across the package."""

from __future__ import annotations

__all__ = [
    "PlategreenError",
    "DimensionMismatch",
    "OutsideDomain",
    "PoleError",
    "QuadratureError",
    "SolverError",
    "CoercivityError",
    "EvaluatorRejected",
    "AuditError",
    "ConfigError",
]


class PlategreenError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(PlategreenError, ValueError):
    """A point's dimension does not match its domain."""


class OutsideDomain(PlategreenError, ValueError):
    """A point violates an interior/boundary membership precondition."""


class PoleError(PlategreenError, ValueError):
    """A kernel was evaluated at its pole where it is not defined."""


class QuadratureError(PlategreenError, RuntimeError):
    """A quadrature rule could not be constructed for the request."""


class SolverError(PlategreenError, RuntimeError):
    """A numerical solve failed or did not meet its residual contract."""


class CoercivityError(PlategreenError, ValueError):
    """The operator's coercivity hypothesis fails or is too weak."""


class EvaluatorRejected(PlategreenError, RuntimeError):
    """An audit refused a flagged (residual-failing) evaluator."""


class AuditError(PlategreenError, ValueError):
    """An audit operation was called outside its contract."""


class ConfigError(PlategreenError, ValueError):
    """Invalid run configuration (CLI exit code 64)."""
