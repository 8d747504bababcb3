"""Control waveforms Omega(t), Delta(t) for the annealing sweep.

Frequencies are angular (rad/us), times in us.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import PhysicalConstants


def _shape(x, ramp: str):
    if ramp == "linear":
        return x
    if ramp == "cosine":
        return 0.5 * (1 - np.cos(np.pi * x))
    raise ValueError(f"unknown ramp shape {ramp!r}")


@dataclass(frozen=True)
class Schedule:
    """Piecewise waveform through the given knots.

    Between knots each control follows ``ramp`` (linear or raised-cosine).
    The knots are also the points where propagators restart their step grid,
    so kinks never fall inside a step.
    """

    times: tuple[float, ...]
    omega: tuple[float, ...]
    delta: tuple[float, ...]
    ramp: str = "linear"

    def __post_init__(self):
        for name in ("times", "omega", "delta"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if not (len(self.times) == len(self.omega) == len(self.delta) >= 2):
            raise ValueError("times, omega and delta need the same length (>= 2)")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("knot times must be strictly increasing")
        if min(self.omega) < 0:
            raise ValueError("Rabi frequency must be non-negative")
        _shape(0.0, self.ramp)

    @classmethod
    def three_stage(
        cls,
        t_f: float | None = None,
        omega_max: float | None = None,
        delta_i: float | None = None,
        delta_f: float | None = None,
        breakpoints: tuple[float, float] = (0.1, 0.9),
        ramp: str = "linear",
        consts: PhysicalConstants | None = None,
    ) -> "Schedule":
        """Omega on / Delta sweep / Omega off.

        Defaults: Omega_max = Omega0, Delta from -2 Omega0 to +2 Omega0 and
        t_f = 3.2 * 2pi / Omega0.
        """
        consts = consts or PhysicalConstants()
        om = consts.omega0 if omega_max is None else omega_max
        di = -2 * consts.omega0 if delta_i is None else delta_i
        df = 2 * consts.omega0 if delta_f is None else delta_f
        tf = consts.default_tf() if t_f is None else t_f
        b1, b2 = breakpoints
        if not 0 < b1 < b2 < 1:
            raise ValueError(f"breakpoints must satisfy 0 < b1 < b2 < 1, got {breakpoints}")
        return cls(
            times=(0.0, b1 * tf, b2 * tf, tf),
            omega=(0.0, om, om, 0.0),
            delta=(di, di, df, df),
            ramp=ramp,
        )

    @classmethod
    def constant(cls, omega: float, delta: float, duration: float) -> "Schedule":
        return cls(times=(0.0, duration), omega=(omega, omega), delta=(delta, delta))

    @property
    def t_f(self) -> float:
        return self.times[-1]

    def _eval(self, values, t):
        t_arr = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self.times, t_arr, side="right") - 1, 0, len(self.times) - 2)
        t0 = np.asarray(self.times)[idx]
        t1 = np.asarray(self.times)[idx + 1]
        v = np.asarray(values)
        x = np.clip((t_arr - t0) / (t1 - t0), 0.0, 1.0)
        out = v[idx] + (v[idx + 1] - v[idx]) * _shape(x, self.ramp)
        return float(out) if out.ndim == 0 else out

    def omega_at(self, t):
        return self._eval(self.omega, t)

    def delta_at(self, t):
        return self._eval(self.delta, t)

    def controls(self, t) -> tuple[float, float]:
        return self.omega_at(t), self.delta_at(t)

    def segments(self, t_start: float = 0.0, t_stop: float | None = None) -> list[tuple[float, float]]:
        """Knot-aligned sub-intervals of [t_start, t_stop]."""
        t_stop = self.t_f if t_stop is None else t_stop
        cuts = [t_start] + [t for t in self.times if t_start < t < t_stop] + [t_stop]
        return [(a, b) for a, b in zip(cuts, cuts[1:]) if b > a]

    def as_dict(self) -> dict:
        return {
            "times": list(self.times),
            "omega": list(self.omega),
            "delta": list(self.delta),
            "ramp": self.ramp,
        }

    def max_omega(self) -> float:
        return max(self.omega)

    def max_abs_delta(self) -> float:
        return max(abs(x) for x in self.delta)

