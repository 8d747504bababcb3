"""Independent reference implementations used only by the tests.

Nothing here imports the propagation or enumeration code under test; each
oracle is the most literal construction available (Kronecker products,
explicit loops, plain Monte Carlo).
"""
from __future__ import annotations

import itertools
import math

import numpy as np

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)  # |up> = (1, 0) first
N_OP = np.array([[1, 0], [0, 0]], dtype=complex)
ID2 = np.eye(2, dtype=complex)


def site_op(op, site, n):
    """Kronecker embedding with atom 0 as the leftmost factor.

    The basis index uses up = 1 in the most significant bit, so the single
    site ordering is (down, up); flip the Pauli conventions accordingly.
    """
    # reorder to (down, up)
    perm = np.array([[0, 1], [1, 0]])
    local = perm @ op @ perm
    mats = [ID2] * n
    mats[site] = local
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def kron_hamiltonian(U, omega, delta):
    n = U.shape[0]
    dim = 1 << n
    H = np.zeros((dim, dim), dtype=complex)
    for j in range(n):
        H += 0.5 * omega * site_op(SX, j, n) - 0.5 * delta * site_op(SZ, j, n)
    for j in range(n):
        for k in range(j + 1, n):
            if U[j, k]:
                H += U[j, k] * site_op(N_OP, j, n) @ site_op(N_OP, k, n)
    return H


def config_energy(spins, U, delta):
    """Classical energy of a 0/1 occupation list at Omega = 0."""
    n = len(spins)
    e = 0.0
    for j in range(n):
        e -= 0.5 * delta * (1 if spins[j] else -1)
        for k in range(j + 1, n):
            e += U[j, k] * spins[j] * spins[k]
    return e


def enumerate_ground(U, delta, tol=1e-9):
    """Loop over all configurations; returns (energy, sorted labels)."""
    n = U.shape[0]
    best, found = math.inf, []
    for bits in itertools.product((0, 1), repeat=n):
        e = config_energy(bits, U, delta)
        label = int("".join(map(str, bits)), 2)
        if e < best - tol:
            best, found = e, [label]
        elif abs(e - best) <= tol:
            found.append(label)
    return best, sorted(found)


def local_search_ground(edges, n, U, delta_f, restarts=200, seed=0):
    """Random-restart single-flip descent on an edge-only Ising model."""
    rng = np.random.default_rng(seed)
    nbrs = [[] for _ in range(n)]
    for j, k in edges:
        nbrs[j].append(k)
        nbrs[k].append(j)

    def energy(s):
        return U * sum(s[j] * s[k] for j, k in edges) - 0.5 * delta_f * (2 * sum(s) - n)

    best, found = math.inf, set()
    for _ in range(restarts):
        s = rng.integers(0, 2, size=n)
        improved = True
        while improved:
            improved = False
            for v in rng.permutation(n):
                sign = 1 - 2 * s[v]
                dE = sign * (U * sum(s[w] for w in nbrs[v]) - delta_f)
                if dE < -1e-12:
                    s[v] ^= 1
                    improved = True
        e = energy(s)
        label = int("".join(map(str, s.tolist())), 2)
        if e < best - 1e-12:
            best, found = e, {label}
        elif abs(e - best) <= 1e-12:
            found.add(label)
    return best, found


def liouvillian(H, jumps):
    """Column-stacked superoperator of -i[H, .] + sum D[L]."""
    d = H.shape[0]
    I = np.eye(d)
    L = -1j * (np.kron(I, H) - np.kron(H.T, I))
    for J in jumps:
        JdJ = J.conj().T @ J
        L += np.kron(J.conj(), J) - 0.5 * np.kron(I, JdJ) - 0.5 * np.kron(JdJ.T, I)
    return L


def spam_monte_carlo(config, edges, p_du, p_ud, n_shots, seed):
    """Empirical Neel order of a fixed configuration after independent bit flips."""
    rng = np.random.default_rng(seed)
    bits = np.tile(np.asarray(config, dtype=int), (n_shots, 1))
    flip_p = np.where(bits == 1, p_du, p_ud)
    flips = rng.binomial(1, flip_p)
    measured = bits ^ flips
    s = 2 * measured - 1
    return float(-np.mean([np.mean(s[:, i] * s[:, j]) for i, j in edges]))


def spam_closed_form(config, edges, p_du, p_ud):
    """Expected post-flip Neel order: each measured sz is a*sz + b in mean."""
    a = 1 - p_du - p_ud
    b = p_ud - p_du
    s = [1 if c else -1 for c in config]
    return float(-np.mean([(a * s[i] + b) * (a * s[j] + b) for i, j in edges]))


def field_loop(phase, site, xs, ys, f, lam):
    """Literal double loop over pixels."""
    x, y, z = site
    total = 0j
    for iy, Y in enumerate(ys):
        for ix, X in enumerate(xs):
            T = 2 * math.pi * (x * X + y * Y) / (f * lam) + math.pi * z * (X * X + Y * Y) / (f * f * lam)
            total += complex(math.cos(phase[iy, ix] - T), math.sin(phase[iy, ix] - T))
    return total
