"""Tail bounds, simulation and optimisation for stalls in cached video delivery."""

__version__ = "0.1.0"

from .errors import (BoundUndefinedError, ConfigurationError, DimensionMismatchError,
                     DomainError, InfeasibleInstanceError, InfeasibleStreamError,
                     InstabilityError, UndefinedMixtureError, WorkloadSpecError)
from .model import (AuxVars, BandwidthWeights, CachePlacement, ControlPoint,
                    ScheduleMatrices, SystemTopology, VideoCatalog, check_feasibility,
                    closest_feasible, uniform_point)

__all__ = [
    "__version__", "AuxVars", "BandwidthWeights", "CachePlacement", "ControlPoint",
    "ScheduleMatrices", "SystemTopology", "VideoCatalog", "check_feasibility",
    "closest_feasible", "uniform_point", "BoundUndefinedError", "ConfigurationError",
    "DimensionMismatchError", "DomainError", "InfeasibleInstanceError",
    "InfeasibleStreamError", "InstabilityError", "UndefinedMixtureError",
    "WorkloadSpecError",
]
