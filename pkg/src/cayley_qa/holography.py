"""Weighted Gerchberg-Saxton phase retrieval for 3D tweezer arrays.

The field at a focal-region point (x, y, z) produced by an SLM phase Phi is

    E(x, y, z) = sum_{X,Y} exp(i Phi(X, Y)) exp(-i T),
    T = 2 pi (x X + y Y) / (f lam) + pi z (X^2 + Y^2) / (f^2 lam)

with (X, Y) the pixel coordinates.  Sums run directly over pixels because
targets are arbitrary 3D points (no FFT grid).
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateTargets

TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class SlmPlane:
    nx: int = 512
    ny: int = 512
    pitch: float = 15.0  # um
    focal_length: float = 4000.0  # um
    wavelength: float = 0.82  # um

    def __post_init__(self):
        if self.nx <= 0 or self.ny <= 0:
            raise ValueError("SLM grid dimensions must be positive")
        if self.focal_length <= 0 or self.wavelength <= 0 or self.pitch <= 0:
            raise ValueError("pitch, focal length and wavelength must be positive")

    @property
    def n_pixels(self) -> int:
        return self.nx * self.ny

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened pixel-centre coordinates (X, Y) in um, centred on the optical axis."""
        x = (np.arange(self.nx) - (self.nx - 1) / 2) * self.pitch
        y = (np.arange(self.ny) - (self.ny - 1) / 2) * self.pitch
        X, Y = np.meshgrid(x, y, indexing="xy")
        return X.ravel(), Y.ravel()


@dataclass(frozen=True)
class TargetSet:
    sites: np.ndarray  # (M, 3) um
    weights: np.ndarray | None = None

    def __post_init__(self):
        sites = np.atleast_2d(np.asarray(self.sites, dtype=float))
        if sites.shape[1] != 3:
            raise ValueError("sites must be (M, 3)")
        w = np.ones(len(sites)) if self.weights is None else np.asarray(self.weights, dtype=float)
        if w.shape != (len(sites),) or np.any(w <= 0):
            raise ValueError("weights must be positive, one per site")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "weights", w / w.sum())

    def __len__(self) -> int:
        return len(self.sites)


def transfer_kernel(site, X, Y, f: float, wavelength: float):
    """Phase T (radians) linking pixel (X, Y) to focal point ``site``."""
    if f <= 0 or wavelength <= 0:
        raise ValueError("f and wavelength must be positive")
    x, y, z = site
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    return TWO_PI * (x * X + y * Y) / (f * wavelength) + np.pi * z * (X**2 + Y**2) / (f**2 * wavelength)


def uniformity(intensities) -> float:
    i = np.asarray(intensities, dtype=float)
    hi, lo = i.max(), i.min()
    return 1.0 - (hi - lo) / (hi + lo) if hi + lo > 0 else 1.0


def reconstruct_field(phase: np.ndarray, points, plane: SlmPlane) -> np.ndarray:
    """Direct pixel sum of the field at each point (E0 = 1)."""
    X, Y = plane.coordinates()
    field_phase = np.exp(1j * np.asarray(phase, dtype=float).ravel())
    out = np.empty(len(points), dtype=np.complex128)
    for m, p in enumerate(np.atleast_2d(points)):
        out[m] = np.sum(field_phase * np.exp(-1j * transfer_kernel(p, X, Y, plane.focal_length, plane.wavelength)))
    return out


@dataclass
class WgsResult:
    phase: np.ndarray = field(repr=False)  # (ny, nx) in [0, 2pi)
    intensities: np.ndarray  # final per-target |E|^2
    history: np.ndarray = field(repr=False)  # (iterations, M) intensities
    uniformity: list[float]
    weights: np.ndarray
    wall_time: float


def _check_distinct(sites: np.ndarray) -> None:
    rounded = {tuple(np.round(s, 12)) for s in sites}
    if len(rounded) != len(sites):
        raise DegenerateTargets("two or more target sites coincide")


def wgs_optimize(
    targets: TargetSet,
    plane: SlmPlane = SlmPlane(),
    iterations: int = 5,
    seed: int = 0,
    phase_fix_from: int | None = 2,
) -> WgsResult:
    """Weighted GS from a seeded random phase.

    From iteration ``phase_fix_from`` on, the target phases E_j/|E_j| in the
    recomposition are frozen at their values entering that iteration, so only
    the weights keep adapting.  Without this the phases drift and uniformity
    wobbles near saturation; ``None`` gives the plain update every iteration.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if phase_fix_from is not None and phase_fix_from < 1:
        raise ValueError("phase_fix_from must be >= 1 or None")
    _check_distinct(targets.sites)
    start = time.perf_counter()
    X, Y = plane.coordinates()
    # rows: exp(-i T_j) over all pixels
    kernel = np.empty((len(targets), plane.n_pixels), dtype=np.complex128)
    for j, site in enumerate(targets.sites):
        kernel[j] = np.exp(-1j * transfer_kernel(site, X, Y, plane.focal_length, plane.wavelength))

    rng = np.random.default_rng(seed)
    phase = rng.uniform(0.0, TWO_PI, plane.n_pixels)
    E = kernel @ np.exp(1j * phase)
    w = targets.weights.copy()
    history, unif = [], []
    frozen = None
    for it in range(iterations):
        amp = np.abs(E)
        if it > 0:
            w = w * amp.mean() / amp
            w /= w.sum()
        unit = E / amp
        if phase_fix_from is not None and it + 1 >= phase_fix_from:
            if frozen is None:
                frozen = unit
            unit = frozen
        phase = np.mod(np.angle(kernel.conj().T @ (w * unit)), TWO_PI)
        E = kernel @ np.exp(1j * phase)
        inten = np.abs(E) ** 2
        history.append(inten)
        unif.append(uniformity(inten))
    return WgsResult(
        phase=phase.reshape(plane.ny, plane.nx),
        intensities=history[-1],
        history=np.array(history),
        uniformity=unif,
        weights=w,
        wall_time=time.perf_counter() - start,
    )


def random_targets(n: int, seed: int, extent: float = 40.0, depth: float = 10.0, min_sep: float = 4.0) -> TargetSet:
    """Random 3D sites in a box, at least ``min_sep`` um apart."""
    rng = np.random.default_rng(seed)
    sites: list[np.ndarray] = []
    while len(sites) < n:
        p = rng.uniform([-extent, -extent, -depth], [extent, extent, depth])
        if all(np.linalg.norm(p - q) >= min_sep for q in sites):
            sites.append(p)
    return TargetSet(np.array(sites))


def write_phase_raw(phase: np.ndarray, path) -> None:
    """Header line ``width height`` then little-endian float64 values, row-major."""
    ny, nx = phase.shape
    with open(path, "wb") as fh:
        fh.write(f"{nx} {ny}\n".encode())
        fh.write(np.ascontiguousarray(phase, dtype="<f8").tobytes())


def read_phase_raw(path) -> np.ndarray:
    with open(path, "rb") as fh:
        nx, ny = (int(v) for v in fh.readline().split())
        data = np.frombuffer(fh.read(), dtype="<f8")
    return data.reshape(ny, nx)


def write_intensity_csv(result: WgsResult, targets: TargetSet, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "target", "x", "y", "z", "intensity", "uniformity"])
        for it, row in enumerate(result.history, start=1):
            for j, (site, inten) in enumerate(zip(targets.sites, row)):
                w.writerow([it, j, *(repr(float(c)) for c in site), repr(float(inten)), repr(result.uniformity[it - 1])])
