"""Rydberg Hamiltonian on a tree geometry, realized matrix-free.

    H(t) = 1/2 sum_j (Omega sx_j - Delta sz_j) + sum_{j<k} U_jk n_j n_k

with sz|up> = +|up> and n = (1 + sz)/2.  Atom 0 is the most significant bit
of the basis index.  The operator is a diagonal vector plus a uniform
single-bit-flip term, which is all the compiled kernels need.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from . import kernels
from .constants import PhysicalConstants, blockade_radius
from .errors import CoincidentAtoms, DimensionMismatch, TooLarge
from .lattice import Geometry, TreeGraph
from .schedule import Schedule

__all__ = [
    "Mode",
    "HamiltonianSpec",
    "IsingParameters",
    "interaction_matrix",
    "apply_hamiltonian",
    "ising_parameters",
    "blockade_radius",
]

DENSE_MAX_N = 12


class Mode(str, Enum):
    FULL = "full"  # C6 / r^6 between every pair
    IDEAL = "ideal"  # U on graph edges only


def interaction_matrix(
    graph: TreeGraph,
    geo: Geometry,
    consts: PhysicalConstants | None = None,
    mode: Mode | str = Mode.IDEAL,
) -> np.ndarray:
    """Symmetric coupling matrix U_jk in rad/us (zero diagonal)."""
    consts = consts or PhysicalConstants()
    mode = Mode(mode)
    dist = geo.distances()
    n = geo.n
    off = ~np.eye(n, dtype=bool)
    if np.any(dist[off] == 0.0):
        j, k = np.argwhere((dist == 0.0) & off)[0]
        raise CoincidentAtoms(f"atoms {j} and {k} share a position")
    U = np.zeros((n, n))
    if mode is Mode.FULL:
        U[off] = consts.c6 / dist[off] ** 6
    else:
        u = consts.c6 / geo.d**6
        for j, k in graph.edges:
            U[j, k] = U[k, j] = u
    return U


def ideal_couplings(graph: TreeGraph, u: float) -> np.ndarray:
    """GraphIdeal coupling matrix with edge strength ``u`` and no geometry."""
    U = np.zeros((graph.n_vertices, graph.n_vertices))
    for j, k in graph.edges:
        U[j, k] = U[k, j] = u
    return U


@dataclass(frozen=True)
class HamiltonianSpec:
    couplings: np.ndarray = field(repr=False)
    drive: Schedule
    mode: Mode = Mode.IDEAL

    def __post_init__(self):
        U = np.array(self.couplings, dtype=float)
        if U.ndim != 2 or U.shape[0] != U.shape[1]:
            raise DimensionMismatch("couplings must be a square matrix")
        if not np.allclose(U, U.T, rtol=0, atol=1e-12 * max(1.0, np.abs(U).max())):
            raise ValueError("couplings must be symmetric")
        if np.any(U < 0):
            raise ValueError("couplings must be non-negative")
        np.fill_diagonal(U, 0.0)
        U.setflags(write=False)
        object.__setattr__(self, "couplings", U)
        object.__setattr__(self, "mode", Mode(self.mode))

    @classmethod
    def from_geometry(cls, graph, geo, drive, consts=None, mode=Mode.IDEAL):
        return cls(interaction_matrix(graph, geo, consts, mode), drive, Mode(mode))

    @property
    def n(self) -> int:
        return self.couplings.shape[0]

    @property
    def dim(self) -> int:
        return 1 << self.n

    @cached_property
    def interaction_diagonal(self) -> np.ndarray:
        return kernels.interaction_diagonal(np.ascontiguousarray(self.couplings))

    @cached_property
    def sz_sum(self) -> np.ndarray:
        """sum_j sz_j per basis state, as float."""
        return (2 * kernels.up_counts(self.n) - self.n).astype(np.float64)

    def controls(self, t: float) -> tuple[float, float]:
        return self.drive.controls(t)

    def diagonal(self, delta: float, weight: float = 1.0) -> np.ndarray:
        """weight * (interaction) - delta/2 * sum sz."""
        return weight * self.interaction_diagonal - 0.5 * delta * self.sz_sum

    def spectral_bounds(self, omega: float, delta: float, weight: float = 1.0):
        """Gershgorin interval containing the spectrum at frozen controls."""
        diag = self.diagonal(delta, weight)
        radius = 0.5 * abs(omega) * self.n
        return float(diag.min()) - radius, float(diag.max()) + radius

    def apply_frozen(self, omega: float, delta: float, psi: np.ndarray, out=None) -> np.ndarray:
        psi = np.ascontiguousarray(psi, dtype=np.complex128)
        if psi.shape != (self.dim,):
            raise DimensionMismatch(f"state has shape {psi.shape}, expected ({self.dim},)")
        if out is None:
            out = np.empty_like(psi)
        kernels.matvec(psi, self.diagonal(delta), 0.5 * omega, self.n, out)
        return out

    def dense(self, t: float | None = None, omega=None, delta=None) -> np.ndarray:
        if self.n > DENSE_MAX_N:
            raise TooLarge(f"dense matrix requested for n={self.n} > {DENSE_MAX_N}")
        if t is not None:
            omega, delta = self.controls(t)
        H = np.diag(self.diagonal(delta)).astype(np.complex128)
        idx = np.arange(self.dim)
        for b in range(self.n):
            H[idx ^ (1 << b), idx] += 0.5 * omega
        return H


def apply_hamiltonian(spec: HamiltonianSpec, t: float, psi: np.ndarray, out=None) -> np.ndarray:
    """H(t) psi using the spec's drive at time ``t``."""
    omega, delta = spec.controls(t)
    return spec.apply_frozen(omega, delta, psi, out)


@dataclass(frozen=True)
class IsingParameters:
    """Ising form  J sum_E sz sz + h_core sum_C sz + h_valence sum_V sz + offset."""

    J: float
    h_z_core: float
    h_z_valence: float
    offset_per_edge: float

    def offset(self, graph: TreeGraph) -> float:
        return self.offset_per_edge * graph.n_edges

    def energy(self, spins, graph: TreeGraph) -> float:
        """Energy of a +/-1 spin list, including the constant offset."""
        s = np.asarray(spins, dtype=float)
        e = self.J * sum(s[j] * s[k] for j, k in graph.edges)
        e += self.h_z_core * s[list(graph.core)].sum()
        e += self.h_z_valence * s[list(graph.valence)].sum()
        return float(e + self.offset(graph))


def ising_parameters(U: float, delta_f: float) -> IsingParameters:
    # core vertices of a Z=3 tree have three bonds, valence vertices one
    return IsingParameters(
        J=U / 4,
        h_z_core=3 * U / 4 - delta_f / 2,
        h_z_valence=U / 4 - delta_f / 2,
        offset_per_edge=U / 4,
    )
