"""Physical constants and unit conventions.

Frequencies are angular, in rad/us (so ``2pi * 1.1`` is 1.1 MHz); lengths
in um; times in us; hbar = 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = 2 * math.pi


def mhz(value: float) -> float:
    """Convert a frequency quoted in MHz to rad/us."""
    return TWO_PI * value


def to_mhz(value: float) -> float:
    return value / TWO_PI


@dataclass(frozen=True)
class PhysicalConstants:
    c6: float = TWO_PI * 1.004e6  # 71S_{1/2}: 1004 GHz um^6
    omega0: float = TWO_PI * 1.1

    def __post_init__(self):
        if not (self.c6 > 0 and self.omega0 > 0):
            raise ValueError("C6 and Omega0 must be positive")

    def blockade_radius(self) -> float:
        return blockade_radius(self)

    def default_tf(self) -> float:
        """Sweep duration 3.2 Rabi periods at Omega0."""
        return TWO_PI * 3.2 / self.omega0

    def coupling_at(self, r: float) -> float:
        return self.c6 / r**6

    def distance_for(self, u: float) -> float:
        """Edge length giving nearest-neighbour coupling ``u`` (rad/us)."""
        return (self.c6 / u) ** (1 / 6)


def blockade_radius(consts: PhysicalConstants | None = None) -> float:
    consts = consts or PhysicalConstants()
    return (consts.c6 / consts.omega0) ** (1 / 6)
