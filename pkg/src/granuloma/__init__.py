"""Four-field chemotaxis model of granuloma formation: solver + checks."""

from .grid import BoxDomain, SimState
from .model import (EnvelopeConstants, FKind, ModelParams, StabilityWindow,
                    envelope_constants, make_window, reproduction_number,
                    s_integral)
from .stepper import StepConfig, run

__version__ = "0.1.0"

__all__ = [
    "BoxDomain", "SimState", "EnvelopeConstants", "FKind", "ModelParams",
    "StabilityWindow", "envelope_constants", "make_window",
    "reproduction_number", "s_integral", "StepConfig", "run", "__version__",
]
