"""Exception types shared across the package."""


class StallBoundError(Exception):
    """Base class for package errors."""


class DimensionMismatchError(StallBoundError, ValueError):
    """Array shapes disagree with the topology or catalog."""


class InfeasibleInstanceError(StallBoundError):
    """No feasible control point could be reached."""


class InfeasibleStreamError(StallBoundError):
    """Positive traffic routed to a stream with zero service rate."""


class UndefinedMixtureError(StallBoundError):
    """Batch-service mixture requested on a stream with no arrivals."""


class InstabilityError(StallBoundError):
    """Load intensity at or above one."""


class BoundUndefinedError(StallBoundError):
    """The tail bound was requested at an infeasible point."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class DomainError(StallBoundError, ValueError):
    """Evaluation requested outside the function's domain."""


class ConfigurationError(StallBoundError, ValueError):
    """Inconsistent simulator or CLI configuration."""


class WorkloadSpecError(StallBoundError, ValueError):
    """Workload specification cannot be realised."""
