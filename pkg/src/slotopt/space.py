"""Design variables of the stator-slot problem and the box they live in."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

VARIABLE_NAMES = (
    "b1",  # top base of the slot trapezoid (mm)
    "b2",  # bottom base (mm)
    "h1",  # leg height (mm)
    "hc",  # height of the conductive part (mm)
    "angle",  # congruent base angle (deg)
    "bar_length",  # axial conductor-bar length (mm)
    "bar_height",  # percent of the available band height
    "bar_width",  # percent of the available band width
    "fillet",  # slot-bottom fillet radius (mm)
    "opening",  # slot opening width (mm)
)

INITIAL = np.array([7.0, 4.0, 21.6, 20.9, 85.9, 125.0, 94.1, 94.1, 5.0, 10.0])
LOWER = np.array([6.0, 3.0, 19.6, 18.9, 84.9, 115.0, 93.1, 93.1, 3.0, 8.0])
UPPER = np.array([8.0, 6.0, 23.6, 22.9, 86.9, 135.0, 95.1, 95.1, 8.0, 12.0])


class OutOfBounds(ValueError):
    """A design vector lies outside the search box."""


@dataclass(frozen=True)
class DesignVector:
    """The ten slot/bar decision variables, physical units."""

    b1: float
    b2: float
    h1: float
    hc: float
    angle: float
    bar_length: float
    bar_height: float
    bar_width: float
    fillet: float
    opening: float

    @classmethod
    def from_array(cls, x) -> DesignVector:
        x = np.asarray(x, dtype=float).ravel()
        if x.size != len(VARIABLE_NAMES):
            raise ValueError(f"expected {len(VARIABLE_NAMES)} values, got {x.size}")
        return cls(*(float(v) for v in x))

    @classmethod
    def initial(cls) -> DesignVector:
        return cls.from_array(INITIAL)

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)])


@dataclass(frozen=True)
class SearchSpace:
    """Axis-aligned box with a map to and from the unit cube."""

    lower: np.ndarray
    upper: np.ndarray
    names: tuple = VARIABLE_NAMES

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ValueError("bounds must satisfy lower < upper elementwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def slot_design(cls) -> SearchSpace:
        return cls(LOWER.copy(), UPPER.copy())

    @classmethod
    def unit(cls, dim: int) -> SearchSpace:
        return cls(np.zeros(dim), np.ones(dim), tuple(f"x{i + 1}" for i in range(dim)))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    def to_unit(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.lower) / self.span

    def from_unit(self, u) -> np.ndarray:
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        return self.lower + u * self.span

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        slack = tol * self.span
        return bool(np.all(x >= self.lower - slack) and np.all(x <= self.upper + slack))

    def check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise OutOfBounds(f"expected {self.dim} coordinates, got {x.shape[-1]}")
        if not self.contains(x):
            bad = [
                self.names[i]
                for i in range(self.dim)
                if np.any(x[..., i] < self.lower[i] - 1e-9 * self.span[i])
                or np.any(x[..., i] > self.upper[i] + 1e-9 * self.span[i])
            ]
            raise OutOfBounds(f"outside bounds: {', '.join(bad)}")
        return x

    def sample_uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.from_unit(rng.random((n, self.dim)))
