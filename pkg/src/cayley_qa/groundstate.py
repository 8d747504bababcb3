"""Classical ground states, phase classification and exact quantum ground states."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from . import kernels
from .constants import PhysicalConstants
from .errors import ConvergenceFailure, TooLarge
from .hamiltonian import HamiltonianSpec, Mode, interaction_matrix
from .lattice import Geometry, TreeGraph, TreeKind
from .measurement import decode_label, encode_label

ENUMERATION_MAX_N = 26
EIGEN_MAX_N = 14


class PhaseLabel(str, Enum):
    I = "I_AllDown"
    II = "II_AllUp"
    III = "III_ShellAlternating"
    IV = "IV_CentersUpUp"
    V = "V_CentersDegenerate"
    OTHER = "Other"


@dataclass(frozen=True)
class GroundSet:
    energy: float
    configs: tuple[int, ...]

    @property
    def degeneracy(self) -> int:
        return len(self.configs)


def _exact(x) -> Fraction | None:
    """Exact rational for ints, Fractions and short decimal floats, else None."""
    if isinstance(x, (Fraction, int)):
        return Fraction(x)
    if isinstance(x, (float, np.floating)):
        text = repr(float(x))
        if "e" in text or "inf" in text or "nan" in text:
            return None
        digits = text.replace("-", "").replace(".", "").lstrip("0")
        return Fraction(text) if len(digits) <= 12 else None
    return None


def _as_config(config, n: int) -> int:
    if isinstance(config, (int, np.integer)):
        return int(config)
    return encode_label(config)


def _full_couplings(graph, geo, U, consts):
    # geometric couplings off the graph, the given U on its edges
    C = interaction_matrix(graph, geo, consts, Mode.FULL)
    for j, k in graph.edges:
        C[j, k] = C[k, j] = U
    return C


def classical_energy(
    config,
    graph: TreeGraph,
    U: float,
    delta_f: float,
    mode: Mode | str = Mode.IDEAL,
    geo: Geometry | None = None,
    consts: PhysicalConstants | None = None,
) -> float:
    """Energy of one basis configuration (label or spin list) at Omega = 0."""
    n = graph.n_vertices
    spins = np.array(decode_label(_as_config(config, n), n), dtype=int)
    up = spins.sum()
    if Mode(mode) is Mode.IDEAL:
        pairs = sum(int(spins[j] and spins[k]) for j, k in graph.edges)
        return U * pairs - 0.5 * delta_f * (2 * up - n)
    if geo is None:
        raise ValueError("full mode needs a geometry")
    C = _full_couplings(graph, geo, U, consts)
    occ = spins.astype(float)
    return float(0.5 * occ @ C @ occ - 0.5 * delta_f * (2 * up - n))


def brute_force_ground(
    graph: TreeGraph,
    U: float,
    delta_f: float,
    mode: Mode | str = Mode.IDEAL,
    geo: Geometry | None = None,
    consts: PhysicalConstants | None = None,
    tie_tol: float | None = None,
) -> GroundSet:
    """Exact minimum over all 2**N configurations, with every tie.

    Ideal mode groups states by (#up-up edges, #up) and compares those classes
    in exact rational arithmetic whenever the inputs are decimal-exact.
    """
    n = graph.n_vertices
    if n > ENUMERATION_MAX_N:
        raise TooLarge(f"enumeration of 2**{n} states exceeds budget (N <= {ENUMERATION_MAX_N})")
    mode = Mode(mode)
    up = kernels.up_counts(n)
    if mode is Mode.IDEAL:
        unit = np.zeros((n, n))
        for j, k in graph.edges:
            unit[j, k] = unit[k, j] = 1.0
        pairs = np.rint(kernels.interaction_diagonal(unit)).astype(np.int64)
        key = pairs * (n + 1) + up
        classes = np.unique(key)
        uq, dq = _exact(U), _exact(delta_f)
        if uq is not None and dq is not None:
            energies = {int(c): uq * (int(c) // (n + 1)) - dq * (2 * (int(c) % (n + 1)) - n) / 2 for c in classes}
            best = min(energies.values())
            winners = [c for c, e in energies.items() if e == best]
            configs = np.flatnonzero(np.isin(key, winners))
            return GroundSet(float(best), tuple(int(c) for c in configs))
        energies = U * pairs - 0.5 * delta_f * (2 * up - n)
    else:
        if geo is None:
            raise ValueError("full mode needs a geometry")
        C = _full_couplings(graph, geo, U, consts)
        energies = kernels.interaction_diagonal(np.ascontiguousarray(C)) - 0.5 * delta_f * (2 * up - n)
    tol = 1e-12 * max(abs(U), abs(delta_f), 1e-300) if tie_tol is None else tie_tol
    best = energies.min()
    configs = np.flatnonzero(energies <= best + tol)
    return GroundSet(float(best), tuple(int(c) for c in configs))


def alternating_config(graph: TreeGraph) -> list[int]:
    """Valence shell up, then alternating shell by shell toward the center."""
    last = graph.n_shells - 1
    return [1 if (last - s) % 2 == 0 else 0 for s in graph.shell_of]


def classify(graph: TreeGraph, ground: GroundSet) -> PhaseLabel:
    n = graph.n_vertices
    alt = alternating_config(graph)
    if ground.degeneracy == 1:
        (label,) = ground.configs
        if label == 0:
            return PhaseLabel.I
        if label == (1 << n) - 1:
            return PhaseLabel.II
        if label == encode_label(alt):
            return PhaseLabel.IV if graph.kind is TreeKind.DUAL_CENTER else PhaseLabel.III
        return PhaseLabel.OTHER
    if ground.degeneracy == 2 and graph.kind is TreeKind.DUAL_CENTER:
        c0, c1 = graph.centers
        expected = set()
        for a, b in ((1, 0), (0, 1)):
            cfg = list(alt)
            cfg[c0], cfg[c1] = a, b
            expected.add(encode_label(cfg))
        if set(ground.configs) == expected:
            return PhaseLabel.V
    return PhaseLabel.OTHER


@dataclass(frozen=True)
class PhasePoint:
    u: float  # U / Omega0
    delta: float  # Delta_f / Omega0
    label: PhaseLabel
    degeneracy: int
    energy: float  # / Omega0
    configs: tuple[int, ...] = ()


def phase_diagram(
    graph: TreeGraph,
    grid: Iterable[tuple[float, float]],
    mode: Mode | str = Mode.IDEAL,
    geo: Geometry | None = None,
    consts: PhysicalConstants | None = None,
) -> list[PhasePoint]:
    """Classify each (U/Omega0, Delta_f/Omega0) grid point.

    In full mode the geometry is rescaled so that its edge coupling equals U.
    """
    consts = consts or PhysicalConstants()
    mode = Mode(mode)
    out = []
    for u, delta in grid:
        if mode is Mode.IDEAL:
            gs = brute_force_ground(graph, u, delta)
            energy = gs.energy
        else:
            if geo is None:
                raise ValueError("full mode needs a geometry")
            d_new = consts.distance_for(u * consts.omega0)
            scaled = Geometry(geo.positions * (d_new / geo.d), d_new)
            w = consts.omega0
            gs = brute_force_ground(graph, u * w, delta * w, Mode.FULL, scaled, consts, tie_tol=1e-12 * w)
            energy = gs.energy / w
        out.append(PhasePoint(u, delta, classify(graph, gs), gs.degeneracy, energy, gs.configs))
    return out


def write_phase_csv(points: Sequence[PhasePoint], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["U_over_Omega0", "Delta_over_Omega0", "label", "degeneracy", "energy"])
        for p in points:
            w.writerow([repr(float(p.u)), repr(float(p.delta)), p.label.value, p.degeneracy, repr(float(p.energy))])


def critical_distance_ratio(delta_f_over_omega0: float = 2.0) -> float:
    """d_c / r_b where the edge coupling U(d) equals Delta_f."""
    return delta_f_over_omega0 ** (-1 / 6)


def exact_ground_state(
    spec: HamiltonianSpec,
    t: float | None = None,
    omega: float | None = None,
    delta: float | None = None,
    tol: float = 1e-12,
    seed: int = 0,
) -> tuple[float, np.ndarray]:
    """Lowest eigenpair of H at frozen controls (from ``t`` or given explicitly)."""
    if spec.n > EIGEN_MAX_N:
        raise TooLarge(f"exact ground state limited to N <= {EIGEN_MAX_N}, got {spec.n}")
    if t is not None:
        omega, delta = spec.controls(t)
    lo, hi = spec.spectral_bounds(omega, delta)
    norm_est = max(abs(lo), abs(hi), 1e-300)
    dim = spec.dim
    if dim <= 64:
        vals, vecs = np.linalg.eigh(spec.dense(omega=omega, delta=delta))
        energy, vec = float(vals[0]), vecs[:, 0]
    else:
        op = LinearOperator(
            (dim, dim),
            matvec=lambda v: spec.apply_frozen(omega, delta, np.ravel(v)),
            dtype=np.complex128,
        )
        v0 = np.random.default_rng(seed).normal(size=dim).astype(np.complex128)
        try:
            vals, vecs = eigsh(op, k=2, which="SA", tol=tol, v0=v0, maxiter=20 * dim)
        except ArpackNoConvergence as exc:
            raise ConvergenceFailure(
                "Lanczos did not converge",
                {"converged": len(exc.eigenvalues), "dim": dim},
            ) from exc
        order = np.argsort(vals)
        energy, vec = float(vals[order[0]]), vecs[:, order[0]]
    vec = vec / np.linalg.norm(vec)
    # fix the global phase: largest component real positive
    k = int(np.argmax(np.abs(vec)))
    vec = vec * (abs(vec[k]) / vec[k])
    resid = np.linalg.norm(spec.apply_frozen(omega, delta, vec) - energy * vec)
    if resid > 1e-8 * norm_est:
        raise ConvergenceFailure(
            f"residual {resid:.3e} exceeds 1e-8 * |H|",
            {"residual": float(resid), "norm_estimate": norm_est},
        )
    return energy, vec

