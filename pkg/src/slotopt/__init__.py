"""Multi-fidelity Bayesian optimization of stator-slot conductor packing."""

__version__ = "0.1.0"

from .geometry import ConductorBar, ConductorLayout, InfeasibleGeometry, SlotGeometry, slot_fill_factor  # noqa: E402
from .machine import EvaluationResult, SlotDesignEvaluator  # noqa: E402
from .space import DesignVector, SearchSpace  # noqa: E402
from .synthetic import SyntheticProblem  # noqa: E402

__all__ = [
    "ConductorBar",
    "ConductorLayout",
    "DesignVector",
    "EvaluationResult",
    "InfeasibleGeometry",
    "SearchSpace",
    "SlotDesignEvaluator",
    "SlotGeometry",
    "SyntheticProblem",
    "slot_fill_factor",
]
