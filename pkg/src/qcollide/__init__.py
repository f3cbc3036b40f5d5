"""Monitored discrete-time collision-model dynamics of a kinetically constrained qubit chain.

The package simulates a driven, interacting qubit chain that repeatedly
collides with a measured-and-reset ancilla register: exact Kraus channel
construction, stochastic trajectory sampling, dynamical order parameters
(outcome activity and space-time correlations), an s-ensemble layer for
dynamical phase diagrams, and the continuous-time (Lindblad) limit.
"""

__version__ = "0.1.0"

from .errors import (
    ConvergenceError,
    NumericalConsistencyError,
    QCollideError,
    ResourceLimitError,
    SchemaError,
)
from .model import ModelParams

__all__ = [
    "ModelParams",
    "QCollideError",
    "ResourceLimitError",
    "ConvergenceError",
    "NumericalConsistencyError",
    "SchemaError",
    "__version__",
]
