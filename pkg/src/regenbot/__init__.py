"""Energy-regenerative trajectory planning and simulation for a 3-joint arm."""

from . import actuator, energy_audit, robot_model, sim, trajopt
from .estimator import EnergyOptimalTrajectory
from .exceptions import (AuditInconsistencyError, DepletedStorageError, InputDomainError,
                         ModelConsistencyError, NumericalError, OptimizationFailedError,
                         RegenbotError)

__version__ = "0.1.0"

__all__ = ["actuator", "energy_audit", "robot_model", "sim", "trajopt", "EnergyOptimalTrajectory", "AuditInconsistencyError",
           "DepletedStorageError", "InputDomainError", "ModelConsistencyError",
           "NumericalError", "OptimizationFailedError", "RegenbotError"]
