"""Annealing dynamics: closed, Lindblad and quantum-trajectory propagation.

Closed-system steps use a fourth-order commutator-free Magnus scheme (two
frozen-control exponentials per step), each exponential applied by a
Chebyshev expansion on the matrix-free Hamiltonian.  Step grids restart at
every schedule knot so waveform kinks never fall inside a step.

Dephasing with jump operator sqrt(g) n_j generates the same dissipator as
sqrt(g/4) sz_j, whose no-jump rate is state independent.  Trajectories
therefore evolve under the Hermitian H and pick up sz_j kicks at a fixed
rate; collective dephasing enters as a Gaussian random phase on sum_j n_j,
which averages to the collective dissipator exactly.  Because every
trajectory shares the same propagators they are advanced together as one
(dim, batch) block.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import jv

from . import kernels
from .constants import TWO_PI
from .errors import PositivityViolation, StepControlFailure, TooLarge
from .hamiltonian import HamiltonianSpec
from .lattice import TreeGraph
from .measurement import ShotRecord, label_bits
from .schedule import Schedule

LINDBLAD_MAX_N = 7
TRAJECTORY_MAX_N = 14
TABLE_MAX_DIM = 1 << 16
DEFAULT_SAMPLES = 200

_SQ3 = math.sqrt(3.0)
_C1, _C2 = 0.5 - _SQ3 / 6, 0.5 + _SQ3 / 6
_A1, _A2 = 0.25 - _SQ3 / 6, 0.25 + _SQ3 / 6


@dataclass(frozen=True)
class NoiseModel:
    """Dephasing rates in 1/us for jump operators sqrt(g) n_j and sqrt(g_c) sum_j n_j.

    Defaults read the quoted 36 kHz and 3 kHz as plain rates (no 2pi).
    """

    gamma_individual: float = 0.036
    gamma_collective: float = 0.003

    def __post_init__(self):
        if self.gamma_individual < 0 or self.gamma_collective < 0:
            raise ValueError("dephasing rates must be non-negative")

    @classmethod
    def from_khz(cls, individual_khz: float, collective_khz: float, angular: bool = False):
        """Rates from quoted kHz figures; ``angular`` multiplies by 2pi."""
        scale = TWO_PI * 1e-3 if angular else 1e-3
        return cls(individual_khz * scale, collective_khz * scale)

    @property
    def is_noiseless(self) -> bool:
        return self.gamma_individual == 0 and self.gamma_collective == 0


@dataclass(frozen=True)
class StepControl:
    """Maximum step (us); with ``verify`` the run is repeated at half the step
    until the final-state fidelities of successive runs agree within ``tol``."""

    dt_max: float = 0.05
    verify: bool = False
    tol: float = 1e-8
    max_refinements: int = 4


@dataclass
class EvolutionResult:
    times: np.ndarray
    norms: np.ndarray
    occupations: np.ndarray  # (T, N) <n_j>
    neel: np.ndarray | None
    ground_probability: np.ndarray | None
    final_state: np.ndarray | None = field(default=None, repr=False)
    states: np.ndarray | None = field(default=None, repr=False)
    occupations_se: np.ndarray | None = None
    neel_se: np.ndarray | None = None
    ground_probability_se: np.ndarray | None = None
    min_eigenvalues: np.ndarray | None = None
    n_traj: int | None = None
    extras: dict = field(default_factory=dict)

    def records(self) -> list[dict]:
        out = []
        for i, t in enumerate(self.times):
            rec = {
                "t": float(t),
                "norm": float(self.norms[i]),
                "O_N": None if self.neel is None else float(self.neel[i]),
                "n": [float(x) for x in self.occupations[i]],
                "ground_overlap": None
                if self.ground_probability is None
                else float(self.ground_probability[i]),
            }
            if self.neel_se is not None:
                rec["O_N_se"] = float(self.neel_se[i])
                rec["n_se"] = [float(x) for x in self.occupations_se[i]]
                rec["ground_overlap_se"] = float(self.ground_probability_se[i])
            out.append(rec)
        return out

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.records():
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


# --- observables ------------------------------------------------------------


class _Observables:
    """Per-atom occupations, edge sz-sz correlators and ground weight from |psi|^2."""

    def __init__(self, n: int, edges: Sequence[tuple[int, int]], ground: Sequence[int] | None):
        self.n = n
        self.edges = list(edges)
        self.ground = None if ground is None else np.asarray(sorted(ground), dtype=np.int64)
        self.dim = 1 << n
        if self.dim <= TABLE_MAX_DIM:
            bits = label_bits(np.arange(self.dim), n).astype(np.float64)
            self.bits = bits
            self.zz = np.stack(
                [(2 * bits[:, i] - 1) * (2 * bits[:, j] - 1) for i, j in self.edges], axis=1
            ) if self.edges else np.zeros((self.dim, 0))
        else:
            self.bits = None

    def __call__(self, probs: np.ndarray):
        """probs: (dim,) or (dim, B).  Returns occupations, zz, ground weight per column."""
        p = probs if probs.ndim == 2 else probs[:, None]
        if self.bits is not None:
            occ = p.T @ self.bits
            zz = p.T @ self.zz
        else:
            occ = np.empty((p.shape[1], self.n))
            zz = np.empty((p.shape[1], len(self.edges)))
            for c in range(p.shape[1]):
                occ[c], zz[c] = self._marginals(p[:, c])
        gp = p[self.ground].sum(axis=0) if self.ground is not None else None
        return occ, zz, gp

    def _marginals(self, p):
        n = self.n
        occ = np.empty(n)
        for a in range(n):
            occ[a] = p.reshape(1 << a, 2, -1)[:, 1, :].sum()
        zz = np.empty(len(self.edges))
        for e, (i, j) in enumerate(self.edges):
            i, j = min(i, j), max(i, j)
            m = p.reshape(1 << i, 2, 1 << (j - i - 1), 2, -1).sum(axis=(0, 2, 4))
            zz[e] = m[0, 0] + m[1, 1] - m[0, 1] - m[1, 0]
        return occ, zz


def neel_order(source, graph: TreeGraph) -> float:
    """-(edge average of <sz_i sz_j>) for a state vector, density matrix or shot record."""
    edges = list(graph.edges)
    if isinstance(source, ShotRecord):
        from .measurement import sample_neel_order

        return sample_neel_order(source, edges)
    arr = np.asarray(source)
    probs = np.real(np.diag(arr)) if arr.ndim == 2 else np.abs(arr) ** 2
    obs = _Observables(graph.n_vertices, edges, None)
    _, zz, _ = obs(probs)
    return float(-zz[0].mean())


def target_ground_configs(spec: HamiltonianSpec, sched: Schedule, rtol: float = 1e-9) -> list[int]:
    """Classical ground set of H at the final detuning (Omega = 0)."""
    diag = spec.diagonal(sched.delta_at(sched.t_f))
    lo = diag.min()
    tol = rtol * max(1.0, float(np.abs(diag).max()))
    return np.flatnonzero(diag <= lo + tol).tolist()


# --- propagation core -------------------------------------------------------


def _chebyshev_terms(x: float, eps: float = 1e-16) -> np.ndarray:
    kmax = int(x + 12 * max(x, 1.0) ** (1 / 3) + 40)
    k = np.arange(kmax + 1)
    j = jv(k, x)
    tail = np.flatnonzero((np.abs(j) > eps) | (k <= x))
    return j[: tail[-1] + 2]


def expm_apply(spec: HamiltonianSpec, omega: float, delta: float, tau: float, psi: np.ndarray) -> np.ndarray:
    """exp(-i tau H(omega, delta)) psi by Chebyshev expansion; psi is (dim,) or (dim, B)."""
    diag = spec.diagonal(delta)
    radius = 0.5 * abs(omega) * spec.n
    lo, hi = float(diag.min()) - radius, float(diag.max()) + radius
    center = 0.5 * (hi + lo)
    half = max(0.5 * (hi - lo), 1e-12) * (1 + 1e-12)
    x = half * tau
    bessel = _chebyshev_terms(abs(x))
    sign = 1.0 if tau >= 0 else -1.0
    coefs = [(2.0 if k else 1.0) * ((-1j * sign) ** k) * b for k, b in enumerate(bessel)]

    batch = psi.ndim == 2
    step = kernels.cheb_step_batch if batch else kernels.cheb_step
    psi = np.ascontiguousarray(psi, dtype=np.complex128)
    acc = coefs[0] * psi
    if len(coefs) > 1:
        cur = np.empty_like(psi)
        spare = np.zeros_like(psi)
        step(psi, spare, cur, acc, diag, 0.5 * omega, spec.n, 1.0 / half, center, coefs[1], 1.0)
        prev, nxt = psi, spare
        for c in coefs[2:]:
            step(cur, prev, nxt, acc, diag, 0.5 * omega, spec.n, 1.0 / half, center, c, 2.0)
            # never write into the caller's array
            recycled = prev if prev is not psi else np.empty_like(psi)
            prev, cur, nxt = cur, nxt, recycled
    acc *= np.exp(-1j * center * tau)
    return acc


def _cf4_step(spec, sched, psi, t0, h, kick: Callable | None = None):
    o1, d1 = sched.controls(t0 + _C1 * h)
    o2, d2 = sched.controls(t0 + _C2 * h)
    # a1 + a2 = 1/2, so each factor is H at blended controls over h/2
    psi = expm_apply(spec, 2 * (_A2 * o1 + _A1 * o2), 2 * (_A2 * d1 + _A1 * d2), 0.5 * h, psi)
    if kick is not None:
        psi = kick(psi, t0, h)
    return expm_apply(spec, 2 * (_A1 * o1 + _A2 * o2), 2 * (_A1 * d1 + _A2 * d2), 0.5 * h, psi)


def _sample_grid(sched: Schedule, sample_times) -> np.ndarray:
    if sample_times is None:
        return np.linspace(0.0, sched.t_f, DEFAULT_SAMPLES)
    ts = np.asarray(sample_times, dtype=float)
    if ts.ndim != 1 or ts.size == 0 or np.any(np.diff(ts) < 0) or ts[0] < 0 or ts[-1] > sched.t_f * (1 + 1e-12):
        raise ValueError("sample_times must be sorted within [0, t_f]")
    return ts


def _steps_between(sched: Schedule, a: float, b: float, dt_max: float):
    for s0, s1 in sched.segments(a, b):
        m = max(1, math.ceil((s1 - s0) / dt_max - 1e-9))
        h = (s1 - s0) / m
        for i in range(m):
            yield s0 + i * h, h


def step_schedule(sched: Schedule, times: np.ndarray, dt_max: float) -> list[list[tuple[float, float]]]:
    """Steps to take before each sample time (first entry covers [0, times[0]])."""
    grid = []
    prev = 0.0
    for t in times:
        grid.append(list(_steps_between(sched, prev, float(t), dt_max)) if t > prev else [])
        prev = float(t)
    return grid


def _initial_state(n: int, psi0) -> np.ndarray:
    if psi0 is None:
        psi = np.zeros(1 << n, dtype=np.complex128)
        psi[0] = 1.0
        return psi
    psi = np.array(psi0, dtype=np.complex128)
    if psi.shape != (1 << n,):
        raise ValueError(f"initial state must have shape ({1 << n},)")
    return psi


def _run_closed(spec, sched, psi, times, dt_max, obs, store_states):
    grid = step_schedule(sched, times, dt_max)
    T = len(times)
    occ = np.empty((T, spec.n))
    zz = np.empty((T, len(obs.edges)))
    gp = np.empty(T) if obs.ground is not None else None
    norms = np.empty(T)
    states = np.empty((T, psi.size), dtype=np.complex128) if store_states else None
    for i, steps in enumerate(grid):
        for t0, h in steps:
            psi = _cf4_step(spec, sched, psi, t0, h)
        probs = np.abs(psi) ** 2
        norms[i] = probs.sum()
        o, z, g = obs(probs)
        occ[i], zz[i] = o[0], z[0]
        if gp is not None:
            gp[i] = g[0]
        if store_states:
            states[i] = psi
    return psi, norms, occ, zz, gp, states


def _fidelity(a, b) -> float:
    return float(abs(np.vdot(a, b)) ** 2 / (np.vdot(a, a).real * np.vdot(b, b).real))


def evolve_schrodinger(
    spec: HamiltonianSpec,
    sched: Schedule | None = None,
    psi0=None,
    step: StepControl = StepControl(),
    sample_times=None,
    graph: TreeGraph | None = None,
    ground_configs: Sequence[int] | None = None,
    store_states: bool = False,
) -> EvolutionResult:
    """Closed-system anneal from ``psi0`` (default all down) under the schedule."""
    sched = sched or spec.drive
    times = _sample_grid(sched, sample_times)
    psi = _initial_state(spec.n, psi0)
    if ground_configs is None:
        ground_configs = target_ground_configs(spec, sched)
    edges = graph.edges if graph is not None else ()
    obs = _Observables(spec.n, edges, ground_configs)

    dt = step.dt_max
    out = _run_closed(spec, sched, psi, times, dt, obs, store_states)
    if step.verify:
        for _ in range(step.max_refinements):
            dt /= 2
            finer = _run_closed(spec, sched, psi, times, dt, obs, store_states)
            change = 1.0 - _fidelity(out[0], finer[0])
            out = finer
            if change < step.tol:
                break
        else:
            raise StepControlFailure(
                f"final-state fidelity still changes by {change:.2e} at dt={dt:.3g} us"
            )
    final, norms, occ, zz, gp, states = out
    return EvolutionResult(
        times=times,
        norms=norms,
        occupations=occ,
        neel=-zz.mean(axis=1) if zz.shape[1] else None,
        ground_probability=gp,
        final_state=final,
        states=states,
        extras={"dt": dt},
    )


# --- trajectories -------------------------------------------------------------


def _trajectory_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def _noise_draws(noise: NoiseModel, n: int, hs: np.ndarray, seed: int, indices: range):
    """Per-trajectory sz-kick masks (steps, n) and collective phases (steps,)."""
    p_flip = 0.5 * (1 - np.exp(-0.5 * noise.gamma_individual * hs))
    sig = np.sqrt(noise.gamma_collective * hs)
    flips, phases = [], []
    for i in indices:
        rng = _trajectory_rng(seed, i)
        u = rng.random((hs.size, n))
        g = rng.standard_normal(hs.size)
        flips.append(u < p_flip[:, None])
        phases.append(g * sig)
    return np.stack(flips, axis=-1), np.stack(phases, axis=-1)


def _run_batch(spec, sched, psi0, times, dt_max, noise, seed, indices, obs):
    grid = step_schedule(sched, times, dt_max)
    hs = np.array([h for steps in grid for _, h in steps])
    flips, phases = _noise_draws(noise, spec.n, hs, seed, indices)
    B = len(indices)
    n = spec.n
    up = kernels.up_counts(n)
    all_bits = label_bits(np.arange(1 << n), n)
    up_rows = [np.flatnonzero(all_bits[:, a]) for a in range(n)]
    psi = np.repeat(psi0[:, None], B, axis=1)
    T = len(times)
    occ = np.empty((T, B, n))
    zz = np.empty((T, B, len(obs.edges)))
    gp = np.empty((T, B)) if obs.ground is not None else None
    norms = np.empty((T, B))
    k = 0

    def kick(state, t0, h):
        nonlocal k
        mask = flips[k]
        for a in range(n):
            hit = np.flatnonzero(mask[a])
            if hit.size:
                # sz on atom a: negate the amplitudes with that atom up
                state[np.ix_(up_rows[a], hit)] *= -1
        if noise.gamma_collective:
            table = np.exp(-1j * np.outer(np.arange(n + 1), phases[k]))
            state *= table[up]
        k += 1
        return state

    use_kick = kick if not noise.is_noiseless else None
    for i, steps in enumerate(grid):
        for t0, h in steps:
            if use_kick is None:
                psi = _cf4_step(spec, sched, psi, t0, h)
            else:
                psi = _cf4_step(spec, sched, psi, t0, h, use_kick)
        probs = np.abs(psi) ** 2
        norms[i] = probs.sum(axis=0)
        o, z, g = obs(probs)
        occ[i], zz[i] = o, z
        if gp is not None:
            gp[i] = g
    return psi, norms, occ, zz, gp


def _chunks(n_traj: int, workers: int) -> list[range]:
    size = math.ceil(n_traj / workers)
    return [range(s, min(s + size, n_traj)) for s in range(0, n_traj, size)]


def evolve_trajectories(
    spec: HamiltonianSpec,
    sched: Schedule | None = None,
    psi0=None,
    noise: NoiseModel = NoiseModel(),
    n_traj: int = 500,
    seed: int = 0,
    sample_times=None,
    step: StepControl = StepControl(),
    graph: TreeGraph | None = None,
    ground_configs: Sequence[int] | None = None,
    threads: int = 1,
    chunk: int = 250,
    keep_final_states: bool = False,
) -> EvolutionResult:
    """Quantum-trajectory average with standard errors.

    Trajectory ``i`` draws its noise from ``SeedSequence(seed, spawn_key=(i,))``
    so results do not depend on ``threads`` or ``chunk``.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    if spec.n > TRAJECTORY_MAX_N and not noise.is_noiseless:
        raise TooLarge(f"noisy trajectories limited to N <= {TRAJECTORY_MAX_N}")
    sched = sched or spec.drive
    times = _sample_grid(sched, sample_times)
    psi = _initial_state(spec.n, psi0)
    if ground_configs is None:
        ground_configs = target_ground_configs(spec, sched)
    edges = graph.edges if graph is not None else ()
    obs = _Observables(spec.n, edges, ground_configs)

    pieces = _chunks(n_traj, max(1, math.ceil(n_traj / chunk)))

    def work(idx):
        return _run_batch(spec, sched, psi, times, step.dt_max, noise, seed, idx, obs)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, pieces))
    else:
        parts = [work(p) for p in pieces]

    finals = np.concatenate([p[0] for p in parts], axis=1)
    norms = np.concatenate([p[1] for p in parts], axis=1)
    occ = np.concatenate([p[2] for p in parts], axis=1)
    zz = np.concatenate([p[3] for p in parts], axis=1)
    gp = np.concatenate([p[4] for p in parts], axis=1) if obs.ground is not None else None

    def mean_se(x):
        m = x.mean(axis=1)
        se = x.std(axis=1, ddof=1) / math.sqrt(n_traj) if n_traj > 1 else np.zeros_like(m)
        return m, se

    occ_m, occ_se = mean_se(occ)
    neel_t = -zz.mean(axis=2) if zz.shape[2] else None
    neel_m, neel_se = mean_se(neel_t) if neel_t is not None else (None, None)
    gp_m, gp_se = mean_se(gp) if gp is not None else (None, None)
    return EvolutionResult(
        times=times,
        norms=norms.mean(axis=1),
        occupations=occ_m,
        neel=neel_m,
        ground_probability=gp_m,
        final_state=finals if keep_final_states else None,
        occupations_se=occ_se,
        neel_se=neel_se if neel_se is not None else np.zeros(len(times)),
        ground_probability_se=gp_se if gp_se is not None else np.zeros(len(times)),
        n_traj=n_traj,
        extras={"final_probabilities": (np.abs(finals) ** 2).mean(axis=1)},
    )


# --- Lindblad master equation -----------------------------------------------


def _dephasing_rates(n: int, noise: NoiseModel) -> np.ndarray:
    """Elementwise decay matrix of the dissipator in the computational basis.

    For Hermitian L diagonal with entries l, D[L] rho has entries
    -(l_a - l_b)^2 / 2 * rho_ab; summed over n_j (individual) and sum n (collective).
    """
    bits = label_bits(np.arange(1 << n), n).astype(np.float64)
    rate = np.zeros((1 << n, 1 << n))
    for a in range(n):
        diff = bits[:, a][:, None] - bits[:, a][None, :]
        rate -= 0.5 * noise.gamma_individual * diff**2
    m = bits.sum(axis=1)
    rate -= 0.5 * noise.gamma_collective * (m[:, None] - m[None, :]) ** 2
    return rate


def evolve_lindblad(
    spec: HamiltonianSpec,
    sched: Schedule | None = None,
    rho0=None,
    noise: NoiseModel = NoiseModel(),
    sample_times=None,
    graph: TreeGraph | None = None,
    ground_configs: Sequence[int] | None = None,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    positivity_tol: float = 1e-8,
) -> EvolutionResult:
    """Dense master-equation integration (N <= 7)."""
    if spec.n > LINDBLAD_MAX_N:
        raise TooLarge(f"dense Lindblad limited to N <= {LINDBLAD_MAX_N}, got {spec.n}")
    sched = sched or spec.drive
    times = _sample_grid(sched, sample_times)
    n, dim = spec.n, spec.dim
    if rho0 is None:
        rho = np.zeros((dim, dim), dtype=np.complex128)
        rho[0, 0] = 1.0
    else:
        rho = np.array(rho0, dtype=np.complex128)
    if ground_configs is None:
        ground_configs = target_ground_configs(spec, sched)
    edges = graph.edges if graph is not None else ()
    obs = _Observables(n, edges, ground_configs)

    decay = _dephasing_rates(n, noise)
    idx = np.arange(dim)
    flip = [idx ^ (1 << b) for b in range(n)]
    sx = np.zeros((dim, dim))
    for f in flip:
        sx[f, idx] += 1.0

    def rhs(t, y):
        r = y.reshape(dim, dim)
        omega, delta = sched.controls(t)
        H = 0.5 * omega * sx
        H[idx, idx] += spec.diagonal(delta)
        comm = H @ r - r @ H
        return (-1j * comm + decay * r).ravel()

    T = len(times)
    occ = np.empty((T, n))
    zz = np.empty((T, len(edges)))
    gp = np.empty(T) if obs.ground is not None else None
    norms = np.empty(T)
    mins = np.empty(T)
    prev = 0.0
    y = rho.ravel()
    for i, t in enumerate(times):
        for a, b in sched.segments(prev, float(t)) if t > prev else []:
            sol = solve_ivp(rhs, (a, b), y, method="DOP853", rtol=rtol, atol=atol)
            if not sol.success:  # pragma: no cover
                raise RuntimeError(sol.message)
            y = sol.y[:, -1]
        prev = float(t)
        r = y.reshape(dim, dim)
        r = 0.5 * (r + r.conj().T)
        probs = np.real(np.diag(r))
        norms[i] = probs.sum()
        mins[i] = np.linalg.eigvalsh(r)[0]
        if mins[i] < -positivity_tol:
            raise PositivityViolation(f"min eigenvalue {mins[i]:.3e} at t={t:.4f} us")
        o, z, g = obs(probs)
        occ[i], zz[i] = o[0], z[0]
        if gp is not None:
            gp[i] = g[0]
    return EvolutionResult(
        times=times,
        norms=norms,
        occupations=occ,
        neel=-zz.mean(axis=1) if zz.shape[1] else None,
        ground_probability=gp,
        final_state=y.reshape(dim, dim),
        min_eigenvalues=mins,
    )


# --- symmetry -----------------------------------------------------------------


def permutation_indices(perm: Sequence[int]) -> np.ndarray:
    """Basis-index map of the atom permutation ``perm`` (atom a -> perm[a])."""
    n = len(perm)
    bits = label_bits(np.arange(1 << n), n)
    weights = np.int64(1) << np.arange(n - 1, -1, -1, dtype=np.int64)
    moved = np.empty_like(bits)
    moved[:, list(perm)] = bits
    return moved.astype(np.int64) @ weights


def antisymmetric_weight(state: np.ndarray, perm_idx: np.ndarray) -> float:
    """|P_- psi|^2 with P_- = (1 - Swap)/2."""
    anti = 0.5 * (state - state[perm_idx])
    return float(np.vdot(anti, anti).real)


def symmetry_overlap(result: EvolutionResult, graph: TreeGraph) -> np.ndarray:
    """Weight of the evolved state in the sector odd under the half swap, per snapshot."""
    if result.states is None:
        raise ValueError("evolution must be run with store_states=True")
    pidx = permutation_indices(graph.swap_permutation())
    return np.array([antisymmetric_weight(s, pidx) for s in result.states])
