"""Cyclic loading programs over pseudo-time."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class LoadSchedule:
    """Triangular cyclic program (or an explicit list of values).

    The first ramp goes from 0 to ``first`` extreme in a quarter cycle; after
    that the value sweeps between the extremes, half a cycle per sweep, so the
    peaks sit at ``(k + 1/4) * steps_per_cycle``. A run of ``cycles`` cycles
    has ``cycles * steps_per_cycle + 1`` samples including step 0.
    """

    control: str = "displacement"
    vmin: float = -1.0
    vmax: float = 1.0
    cycles: int = 1
    steps_per_cycle: int = 80
    first: str = "max"
    values: tuple[float, ...] | None = None
    target: str = "top"
    direction: str = "y"
    fixed: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if self.control not in ("force", "displacement"):
            raise ValueError(f"control must be 'force' or 'displacement', got {self.control!r}")
        if self.direction not in ("x", "y"):
            raise ValueError(f"direction must be 'x' or 'y', got {self.direction!r}")
        if self.first not in ("max", "min"):
            raise ValueError(f"first must be 'max' or 'min', got {self.first!r}")
        if self.values is not None:
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
            if len(self.values) < 1:
                raise ValueError("explicit value list is empty")
            return
        if self.steps_per_cycle < 8:
            raise ValueError("steps_per_cycle must be at least 8")
        if not self.vmin < self.vmax:
            raise ValueError("vmin must be smaller than vmax")
        if self.cycles < 1:
            raise ValueError("need at least one cycle")

    @property
    def n_steps(self) -> int:
        """Number of increments (samples minus one)."""
        if self.values is not None:
            return len(self.values)
        return self.cycles * self.steps_per_cycle

    def sample(self, step: int) -> float:
        if not 0 <= step <= self.n_steps:
            raise IndexError(f"step {step} outside [0, {self.n_steps}]")
        if self.values is not None:
            return 0.0 if step == 0 else self.values[step - 1]
        return triangular(step / self.steps_per_cycle, self.vmin, self.vmax, self.first)

    def samples(self) -> np.ndarray:
        return np.array([self.sample(i) for i in range(self.n_steps + 1)])

    def cycle_of(self, step: int) -> int:
        """1-based cycle index of an increment; step 0 belongs to cycle 0."""
        if self.values is not None:
            return 0 if step == 0 else 1
        return math.ceil(step / self.steps_per_cycle)


def triangular(t: float, vmin: float, vmax: float, first: str = "max") -> float:
    """Triangular wave at time ``t`` measured in cycles, starting at zero."""
    a, b = (vmax, vmin) if first == "max" else (vmin, vmax)
    if t <= 0.25:
        return 4.0 * t * a
    tau = (t - 0.25) % 1.0
    if tau <= 0.5:
        return a + (b - a) * 2.0 * tau
    return b + (a - b) * 2.0 * (tau - 0.5)
