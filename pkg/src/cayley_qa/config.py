"""Experiment configuration: YAML in, typed objects out.

Frequencies are written in MHz (the 2pi is implied), lengths in um, times
in us.  Every section has defaults, so an empty file is a valid config.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .constants import PhysicalConstants, mhz
from .dynamics import NoiseModel
from .errors import ConfigError
from .hamiltonian import Mode
from .lattice import Geometry, Layout, TreeGraph, build_dual_center_tree, build_regular_tree, named_graph
from .measurement import SpamModel
from .schedule import Schedule


@dataclass
class GraphConfig:
    name: str | None = "G10"  # G10, G22, G14; None selects kind/Z/S below
    kind: str = "regular"
    Z: int = 3
    S: int = 3
    layout: str = "planar"
    u_over_omega0: float | None = 1.82  # fixes the edge length
    d_um: float | None = None  # used when u_over_omega0 is None


@dataclass
class ConstantsConfig:
    c6_mhz_um6: float = 1.004e6
    omega0_mhz: float = 1.1


@dataclass
class ScheduleConfig:
    t_f_us: float | None = None  # default 3.2 Rabi periods at Omega0
    omega_max_mhz: float | None = None  # default Omega0
    delta_i_mhz: float | None = None  # default -2 Omega0
    delta_f_mhz: float | None = None  # default +2 Omega0
    breakpoints: list[float] = field(default_factory=lambda: [0.1, 0.9])
    ramp: str = "linear"


@dataclass
class NoiseConfig:
    enabled: bool = True
    individual_khz: float = 36.0
    collective_khz: float = 3.0
    angular: bool = False  # multiply the quoted rates by 2pi


@dataclass
class SpamConfig:
    enabled: bool = True
    p_down_given_up: float = 0.18
    p_up_given_down: float = 0.02


@dataclass
class DynamicsConfig:
    solver: str = "auto"  # auto, schrodinger, trajectories, lindblad
    n_traj: int = 200
    dt_us: float = 0.05
    samples: int = 200
    chunk: int = 250


@dataclass
class PhaseDiagramConfig:
    points: list[list[float]] | None = None  # explicit (U, Delta_f) / Omega0 pairs
    u_range: list[float] = field(default_factory=lambda: [0.0, 6.0, 61])  # start, stop, count
    delta_range: list[float] = field(default_factory=lambda: [-2.0, 8.0, 101])


@dataclass
class HoloConfig:
    n_targets: int = 50
    iterations: int = 5
    sites_um: list[list[float]] | None = None
    extent_um: float = 40.0
    depth_um: float = 10.0
    min_separation_um: float = 4.0
    nx: int = 512
    ny: int = 512
    pitch_um: float = 15.0
    focal_length_um: float = 4000.0
    wavelength_um: float = 0.82


@dataclass
class ExperimentConfig:
    graph: GraphConfig = field(default_factory=GraphConfig)
    mode: str = "ideal"
    constants: ConstantsConfig = field(default_factory=ConstantsConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    spam: SpamConfig = field(default_factory=SpamConfig)
    dynamics: DynamicsConfig = field(default_factory=DynamicsConfig)
    phase_diagram: PhaseDiagramConfig = field(default_factory=PhaseDiagramConfig)
    holo: HoloConfig = field(default_factory=HoloConfig)
    shots: int = 1000
    seed: int = 0
    out: str = "out"
    notes: list[str] = field(default_factory=list)

    # --- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict | None) -> "ExperimentConfig":
        return _build(cls, data or {}, "config")

    def dump(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=True))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = yaml.safe_load(Path(path).read_text())
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if data is not None and not isinstance(data, dict):
            raise ConfigError("config file must contain a mapping")
        return cls.from_dict(data)

    # --- derived objects -------------------------------------------------

    def physical_constants(self) -> PhysicalConstants:
        return PhysicalConstants(mhz(self.constants.c6_mhz_um6), mhz(self.constants.omega0_mhz))

    def edge_length(self) -> float:
        consts = self.physical_constants()
        if self.graph.u_over_omega0 is not None:
            if self.graph.u_over_omega0 <= 0:
                raise ConfigError("graph.u_over_omega0 must be positive")
            return consts.distance_for(self.graph.u_over_omega0 * consts.omega0)
        if self.graph.d_um is None or self.graph.d_um <= 0:
            raise ConfigError("set graph.u_over_omega0 or a positive graph.d_um")
        return self.graph.d_um

    def build_graph(self) -> tuple[TreeGraph, Geometry]:
        d = self.edge_length()
        g = self.graph
        if g.name is not None:
            return named_graph(g.name, d)
        if g.kind == "dual_center":
            return build_dual_center_tree(d)
        if g.kind != "regular":
            raise ConfigError(f"unknown graph kind {g.kind!r}")
        return build_regular_tree(g.Z, g.S, d, Layout(g.layout))

    def build_schedule(self) -> Schedule:
        s = self.schedule
        conv = lambda v: None if v is None else mhz(v)  # noqa: E731
        try:
            return Schedule.three_stage(
                t_f=s.t_f_us,
                omega_max=conv(s.omega_max_mhz),
                delta_i=conv(s.delta_i_mhz),
                delta_f=conv(s.delta_f_mhz),
                breakpoints=tuple(s.breakpoints),
                ramp=s.ramp,
                consts=self.physical_constants(),
            )
        except ValueError as exc:
            raise ConfigError(f"invalid schedule: {exc}") from exc

    def noise_model(self) -> NoiseModel:
        if not self.noise.enabled:
            return NoiseModel(0.0, 0.0)
        return NoiseModel.from_khz(self.noise.individual_khz, self.noise.collective_khz, self.noise.angular)

    def spam_model(self) -> SpamModel | None:
        if not self.spam.enabled:
            return None
        return SpamModel(self.spam.p_down_given_up, self.spam.p_up_given_down)

    def mode_enum(self) -> Mode:
        try:
            return Mode(self.mode)
        except ValueError as exc:
            raise ConfigError(f"mode must be 'ideal' or 'full', got {self.mode!r}") from exc


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        default = fields[name].default_factory if fields[name].default_factory is not dataclasses.MISSING else None
        sub = default() if default is not None else None
        if dataclasses.is_dataclass(sub):
            kwargs[name] = _build(type(sub), value or {}, f"{where}.{name}")
        else:
            kwargs[name] = value
    return cls(**kwargs)


# --- presets -------------------------------------------------------------

# (U/Omega0, graph, default shots) at Delta_f = 2 Omega0
_PRESETS = {
    1: (1.82, "G10", 672),
    2: (2.25, "G22", 2208),
    3: (1.67, "G14", 1000),
    4: (2.70, "G14", 5113),
    5: (5.41, "G14", 1000),
}

PRESET_NOTES = {
    4: "edge length follows U/Omega0 = 2.70, giving d/r_b = 0.847; the quoted figure lists 0.86",
}


def presets() -> dict[int, ExperimentConfig]:
    """The five circled parameter sets; edge lengths follow from U."""
    out = {}
    for key, (u, name, shots) in _PRESETS.items():
        cfg = ExperimentConfig(graph=GraphConfig(name=name, u_over_omega0=u), shots=shots)
        cfg.schedule.delta_f_mhz = 2.0 * cfg.constants.omega0_mhz
        if key in PRESET_NOTES:
            cfg.notes.append(PRESET_NOTES[key])
        out[key] = cfg
    return out


def preset(key: int) -> ExperimentConfig:
    table = presets()
    if key not in table:
        raise ConfigError(f"preset must be one of {sorted(table)}, got {key}")
    return table[key]
