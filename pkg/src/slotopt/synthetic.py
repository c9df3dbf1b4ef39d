"""Two-fidelity 10-D test problem with a known optimum.

The top fidelity is a separable rippled quadratic bowl peaked at a fixed
centre, so its maximum (0) and minimum over the box are exact. The cheap
fidelity adds a smooth bias bounded by ``bias``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .space import SearchSpace

CENTRE = np.array([0.62, 0.31, 0.77, 0.45, 0.18, 0.56, 0.84, 0.39, 0.27, 0.68])
WEIGHTS = np.array([1.0, 0.6, 1.4, 0.8, 1.2, 0.5, 1.0, 0.7, 1.3, 0.9])
RIPPLE = 0.05
BIAS_DIRECTION = np.linspace(1.0, -1.0, 10) / math.sqrt(np.sum(np.linspace(1.0, -1.0, 10) ** 2))


@dataclass(frozen=True)
class SyntheticResult:
    reward: float
    fidelity: int
    eval_cost: float
    feasible: bool = True
    violation: float = 0.0


@lru_cache(maxsize=1)
def _box_minimum() -> float:
    # separable, so the box minimum is a sum of 1-D minima
    grid = np.linspace(0.0, 1.0, 200001)
    total = 0.0
    for c, w in zip(CENTRE, WEIGHTS):
        z = grid - c
        total += np.max(w * z**2 + RIPPLE * (1.0 - np.cos(2 * math.pi * z)))
    return -float(total)


def _bowl(u: np.ndarray) -> np.ndarray:
    z = u - CENTRE
    return -np.sum(WEIGHTS * z**2 + RIPPLE * (1.0 - np.cos(2 * math.pi * z)), axis=-1)


@dataclass(frozen=True)
class SyntheticProblem:
    """Maximize f(u) over the unit box; fidelity 1 is biased, fidelity 2 exact."""

    bias: float = 0.15
    costs: tuple = (1.0, 10.0)
    name: str = "synthetic-10d"
    space: SearchSpace = field(default_factory=lambda: SearchSpace.unit(10))

    @property
    def n_fidelities(self) -> int:
        return 2

    @property
    def optimum(self) -> float:
        return 0.0

    @property
    def f_op(self) -> float:
        return self.optimum

    @property
    def argmax(self) -> np.ndarray:
        return CENTRE.copy()

    @property
    def minimum(self) -> float:
        return _box_minimum()

    @property
    def value_range(self) -> float:
        return self.optimum - self.minimum

    def value(self, u, fidelity: int) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        f = _bowl(u)
        if fidelity == 1:
            f = f + self.bias * np.cos(2 * math.pi * (u @ BIAS_DIRECTION))
        return f

    def evaluate(self, x, fidelity: int = 2) -> SyntheticResult:
        x = self.space.check(np.asarray(x, dtype=float))
        return SyntheticResult(float(self.value(x, fidelity)), fidelity, self.costs[fidelity - 1])

    def cheap_feasible(self, x) -> bool:
        return True
