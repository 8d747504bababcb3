"""Projective readout: basis labels, shot sampling, SPAM flips and histograms.

Labels enumerate the bare-atom basis with down = 0, up = 1 and atom 0 as the
most significant bit, so the Phase III state of G10 reads 575.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DoubleApplication, NotNormalized, TooLarge

LABEL_MAX_N = 26


def encode_label(spins: Sequence[int]) -> int:
    """Spin list (1 = up) to integer label, first atom most significant."""
    if len(spins) > LABEL_MAX_N:
        raise TooLarge(f"labels support at most {LABEL_MAX_N} atoms")
    label = 0
    for s in spins:
        label = (label << 1) | (1 if s else 0)
    return label


def decode_label(label: int, n: int) -> list[int]:
    if n > LABEL_MAX_N:
        raise TooLarge(f"labels support at most {LABEL_MAX_N} atoms")
    return [(label >> (n - 1 - a)) & 1 for a in range(n)]


def label_bits(labels: np.ndarray, n: int) -> np.ndarray:
    """(len(labels), n) array of 0/1 occupations."""
    labels = np.asarray(labels, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((labels[:, None] >> shifts[None, :]) & 1).astype(np.int8)


@dataclass(frozen=True)
class SpamModel:
    p_down_given_up: float = 0.18
    p_up_given_down: float = 0.02

    def __post_init__(self):
        for p in (self.p_down_given_up, self.p_up_given_down):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"SPAM probabilities must lie in [0, 1], got {p}")

    def affine(self) -> tuple[float, float]:
        """(a, b) with E[measured sz] = a * sz + b for a single atom."""
        m_up = 1 - 2 * self.p_down_given_up
        m_down = -1 + 2 * self.p_up_given_down
        return (m_up - m_down) / 2, (m_up + m_down) / 2


@dataclass(frozen=True)
class ShotRecord:
    n_atoms: int
    counts: dict = field(repr=False)  # label -> count
    spam_applied: bool = False
    seed: int | None = None

    def __post_init__(self):
        clean = {int(k): int(v) for k, v in sorted(self.counts.items()) if v}
        object.__setattr__(self, "counts", clean)

    @property
    def n_shots(self) -> int:
        return sum(self.counts.values())

    def shots(self) -> np.ndarray:
        """All shots as labels, in ascending label order."""
        if not self.counts:
            return np.zeros(0, dtype=np.int64)
        labels = np.fromiter(self.counts.keys(), dtype=np.int64)
        reps = np.fromiter(self.counts.values(), dtype=np.int64)
        return np.repeat(labels, reps)

    def argmax(self) -> int:
        return max(self.counts.items(), key=lambda kv: (kv[1], -kv[0]))[0]

    def top(self, k: int) -> list[tuple[int, int]]:
        return sorted(self.counts.items(), key=lambda kv: (-kv[1], kv[0]))[:k]


def _probabilities(state) -> np.ndarray:
    arr = np.asarray(state)
    if arr.ndim == 2:
        p = np.real(np.diag(arr)).copy()
    else:
        p = np.abs(arr) ** 2
    p[p < 0] = 0.0
    return p


def sample_bitstrings(state, n_shots: int, seed: int | None = None) -> ShotRecord:
    """I.i.d. projective measurements of a state vector or density matrix."""
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    return sample_distribution(_probabilities(state), n_shots, seed)


def sample_distribution(probs, n_shots: int, seed: int | None = None) -> ShotRecord:
    """I.i.d. draws from basis probabilities (e.g. a trajectory-averaged diagonal)."""
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    p = np.array(probs, dtype=float)
    p[p < 0] = 0.0
    total = p.sum()
    if abs(total - 1.0) > 1e-6:
        raise NotNormalized(f"state norm {total:.9f} differs from 1 by more than 1e-6")
    n = int(round(math.log2(p.size)))
    rng = np.random.default_rng(seed)
    draws = rng.choice(p.size, size=n_shots, p=p / total)
    labels, counts = np.unique(draws, return_counts=True)
    return ShotRecord(n, dict(zip(labels.tolist(), counts.tolist())), False, seed)


def apply_spam(record: ShotRecord, spam: SpamModel | None = None, seed: int | None = None) -> ShotRecord:
    """Flip each measured bit: up->down w.p. p_down_given_up, down->up w.p. p_up_given_down."""
    if record.spam_applied:
        raise DoubleApplication("SPAM already applied to this record")
    spam = spam or SpamModel()
    shots = record.shots()
    bits = label_bits(shots, record.n_atoms)
    u = np.random.default_rng(seed).random(bits.shape)
    flipped = np.where(bits == 1, u >= spam.p_down_given_up, u < spam.p_up_given_down)
    weights = np.int64(1) << np.arange(record.n_atoms - 1, -1, -1, dtype=np.int64)
    new_labels = flipped.astype(np.int64) @ weights
    labels, counts = np.unique(new_labels, return_counts=True)
    return ShotRecord(record.n_atoms, dict(zip(labels.tolist(), counts.tolist())), True, seed)


@dataclass(frozen=True)
class HistogramRow:
    label: int
    count: int
    probability: float
    stderr: float


def wilson_halfwidth(count: int, n: int, z: float = 1.0) -> float:
    p = count / n
    return z / (1 + z * z / n) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))


def histogram(record: ShotRecord) -> list[HistogramRow]:
    n = record.n_shots
    return [
        HistogramRow(label, c, c / n, wilson_halfwidth(c, n))
        for label, c in sorted(record.counts.items())
    ]


def write_histogram_csv(rows: Sequence[HistogramRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "count", "probability", "stderr"])
        for r in rows:
            w.writerow([r.label, r.count, repr(r.probability), repr(r.stderr)])


def sample_neel_order(record: ShotRecord, edges) -> float:
    """Empirical -<sz_i sz_j> averaged over edges."""
    shots = record.shots()
    sz = 2 * label_bits(shots, record.n_atoms).astype(np.int64) - 1
    corr = [np.mean(sz[:, i] * sz[:, j]) for i, j in edges]
    return float(-np.mean(corr))
