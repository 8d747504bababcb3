"""Cayley-tree graphs and their atom coordinates.

Trees are built breadth-first from the center so that vertex indices follow
shell order; this ordering is also the bit order used for basis labels
(vertex 0 is the most significant bit).

Planar trees live on a honeycomb: every child bond leaves its parent at
+/-60 degrees from the extension of the parent bond, which puts siblings
exactly sqrt(3)*d apart.  From the fourth shell on the honeycomb closes
hexagons, so last-shell branches are rotated out of plane by 2*pi/5 about
their parent bond.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

from .errors import PlanarInfeasible, Unsupported

SQRT3 = math.sqrt(3.0)
BRANCH_ROTATION = 2 * math.pi / 5
CHILD_HALF_ANGLE = math.pi / 3
FIRST_SHELL_AZIMUTHS = (90.0, 210.0, 330.0)
# relative slack when comparing distances against sqrt(3)*d
DIST_RTOL = 1e-9


class Layout(str, Enum):
    PLANAR = "planar"
    ROTATED3D = "rotated3d"


class TreeKind(str, Enum):
    REGULAR = "regular"
    DUAL_CENTER = "dual_center"


@dataclass(frozen=True)
class TreeGraph:
    n_vertices: int
    shell_of: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    parent_of: tuple[int, ...]  # -1 for roots
    kind: TreeKind
    Z: int = 3
    S: int = 3

    def __post_init__(self):
        object.__setattr__(
            self, "edges", tuple(sorted((min(e), max(e)) for e in self.edges))
        )

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_shells(self) -> int:
        return max(self.shell_of) + 1

    @property
    def valence(self) -> tuple[int, ...]:
        last = self.n_shells - 1
        return tuple(v for v, s in enumerate(self.shell_of) if s == last)

    @property
    def core(self) -> tuple[int, ...]:
        last = self.n_shells - 1
        return tuple(v for v, s in enumerate(self.shell_of) if s < last)

    @property
    def centers(self) -> tuple[int, ...]:
        return tuple(v for v, s in enumerate(self.shell_of) if s == 0)

    @property
    def name(self) -> str:
        return f"G{self.n_vertices}"

    def degrees(self) -> list[int]:
        deg = [0] * self.n_vertices
        for j, k in self.edges:
            deg[j] += 1
            deg[k] += 1
        return deg

    def neighbors(self, v: int) -> list[int]:
        return [k if j == v else j for j, k in self.edges if v in (j, k)]

    def shell_populations(self) -> list[int]:
        counts = [0] * self.n_shells
        for s in self.shell_of:
            counts[s] += 1
        return counts

    def signature(self) -> str:
        """Shell signature string such as ``(0s)(1s)^3(2s)^6``."""
        parts = []
        for s, c in enumerate(self.shell_populations()):
            parts.append(f"({s}s)" if c == 1 else f"({s}s)^{c}")
        return "".join(parts)

    def is_tree(self) -> bool:
        if self.n_edges != self.n_vertices - 1:
            return False
        adj: dict[int, list[int]] = {v: [] for v in range(self.n_vertices)}
        for j, k in self.edges:
            adj[j].append(k)
            adj[k].append(j)
        seen = {0}
        stack = [0]
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.n_vertices

    def edge_set(self) -> frozenset[tuple[int, int]]:
        return frozenset(self.edges)

    def swap_permutation(self) -> list[int]:
        """Vertex map exchanging the two center-rooted halves of a dual-center tree.

        Halves are built in lock-step, so the k-th vertex of one half maps
        to the k-th vertex of the other within each shell.
        """
        if self.kind is not TreeKind.DUAL_CENTER:
            raise Unsupported("swap_permutation is defined for dual-center trees only")
        perm = list(range(self.n_vertices))
        for s in range(self.n_shells):
            members = [v for v in range(self.n_vertices) if self.shell_of[v] == s]
            half = len(members) // 2
            for a, b in zip(members[:half], members[half:]):
                perm[a], perm[b] = b, a
        return perm


@dataclass(frozen=True)
class Geometry:
    positions: np.ndarray = field(repr=False)  # (N, 3) in um
    d: float

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(-1, 3)
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    def distances(self) -> np.ndarray:
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        return np.sqrt((diff**2).sum(axis=-1))

    def displaced(self, vertex: int, offset) -> "Geometry":
        pos = self.positions.copy()
        pos[vertex] += np.asarray(offset, dtype=float)
        return Geometry(pos, self.d)


@dataclass(frozen=True)
class ValidationReport:
    edge_dev_max: float
    min_nonedge_ratio: float
    max_nonedge_coupling_ratio: float

    @property
    def ok(self) -> bool:
        return bool(self.min_nonedge_ratio >= SQRT3 * (1 - DIST_RTOL))

    def as_dict(self) -> dict:
        return {
            "edge_dev_max": float(self.edge_dev_max),
            "min_nonedge_ratio": float(self.min_nonedge_ratio),
            "max_nonedge_coupling_ratio": float(self.max_nonedge_coupling_ratio),
        }


def _rotate(vec: np.ndarray, axis: np.ndarray, angle: float) -> np.ndarray:
    # Rodrigues' formula
    axis = axis / np.linalg.norm(axis)
    c, s = math.cos(angle), math.sin(angle)
    return vec * c + np.cross(axis, vec) * s + axis * np.dot(axis, vec) * (1 - c)


def _child_directions(bond: np.ndarray) -> list[np.ndarray]:
    zhat = np.array([0.0, 0.0, 1.0])
    return [_rotate(bond, zhat, +CHILD_HALF_ANGLE), _rotate(bond, zhat, -CHILD_HALF_ANGLE)]


class _Builder:
    """Mutable scratch space used while growing a tree breadth-first."""

    def __init__(self):
        self.shell: list[int] = []
        self.parent: list[int] = []
        self.pos: list[np.ndarray] = []
        self.bond: list[np.ndarray | None] = []

    def add(self, shell, parent, pos, bond):
        self.shell.append(shell)
        self.parent.append(parent)
        self.pos.append(np.asarray(pos, dtype=float))
        self.bond.append(None if bond is None else np.asarray(bond, dtype=float))
        return len(self.shell) - 1

    def grow_shell(self, parents: Iterable[int], d: float) -> list[int]:
        new = []
        for p in parents:
            for direction in _child_directions(self.bond[p]):
                new.append(self.add(self.shell[p] + 1, p, self.pos[p] + d * direction, direction))
        return new

    def rotate_branch(self, p: int, angle: float) -> None:
        """Rotate the children of ``p`` about the axis along ``p``'s own bond."""
        for c, par in enumerate(self.parent):
            if par == p:
                offset = self.pos[c] - self.pos[p]
                self.pos[c] = self.pos[p] + _rotate(offset, self.bond[p], angle)
                self.bond[c] = _rotate(self.bond[c], self.bond[p], angle)

    def edges(self) -> list[tuple[int, int]]:
        return [(p, c) for c, p in enumerate(self.parent) if p >= 0]

    def positions(self) -> np.ndarray:
        return np.array(self.pos)


def _violations(edges, pos: np.ndarray, d: float) -> list[tuple[int, int]]:
    eset = {(min(e), max(e)) for e in edges}
    bad = []
    limit = SQRT3 * d * (1 - DIST_RTOL)
    for j, k in combinations(range(len(pos)), 2):
        if (j, k) in eset:
            continue
        if np.linalg.norm(pos[j] - pos[k]) < limit:
            bad.append((j, k))
    return bad


def build_regular_tree(
    Z: int = 3, S: int = 3, d: float = 1.0, layout: Layout | str = Layout.PLANAR
) -> tuple[TreeGraph, Geometry]:
    """Regular Cayley tree with coordination ``Z`` and ``S`` shells (center = shell 0)."""
    layout = Layout(layout)
    if Z != 3:
        raise Unsupported(f"only Z=3 Cayley trees are supported, got Z={Z}")
    if S not in (2, 3, 4):
        raise Unsupported(f"shell count S must be 2, 3 or 4, got S={S}")
    if not d > 0:
        raise ValueError(f"edge length must be positive, got d={d}")

    b = _Builder()
    b.add(0, -1, (0.0, 0.0, 0.0), None)
    frontier = []
    for az in FIRST_SHELL_AZIMUTHS:
        direction = np.array([math.cos(math.radians(az)), math.sin(math.radians(az)), 0.0])
        frontier.append(b.add(1, 0, d * direction, direction))
    for _ in range(2, S):
        frontier = b.grow_shell(frontier, d)

    if layout is Layout.ROTATED3D and S >= 3:
        for p in {b.parent[v] for v in frontier}:
            b.rotate_branch(p, BRANCH_ROTATION)

    pos = b.positions()
    edges = b.edges()
    if layout is Layout.PLANAR and _violations(edges, pos, d):
        raise PlanarInfeasible(
            f"planar Z={Z}, S={S} tree has non-edge pairs closer than sqrt(3)*d; use rotated3d"
        )
    graph = TreeGraph(
        n_vertices=len(pos),
        shell_of=tuple(b.shell),
        edges=tuple(edges),
        parent_of=tuple(b.parent),
        kind=TreeKind.REGULAR,
        Z=Z,
        S=S,
    )
    return graph, Geometry(pos, d)


def build_dual_center_tree(d: float = 1.0) -> tuple[TreeGraph, Geometry]:
    """The 14-atom dual-center tree (0s)^2(1s)^4(2s)^8.

    Half B is the image of half A under a 180-degree turn about the z axis,
    so the half-swap is a geometric symmetry.  Last-shell branches are
    rotated (in symmetric pairs, in construction order) only until every
    non-edge pair is at least sqrt(3)*d apart.
    """
    if not d > 0:
        raise ValueError(f"edge length must be positive, got d={d}")
    xhat = np.array([1.0, 0.0, 0.0])
    c2z = np.diag([-1.0, -1.0, 1.0])

    b = _Builder()
    a0 = b.add(0, -1, 0.5 * d * xhat, xhat)
    b0 = b.add(0, -1, -0.5 * d * xhat, -xhat)
    shell1 = b.grow_shell([a0, b0], d)
    b.grow_shell(shell1, d)

    n_half1 = len(shell1) // 2
    for pa in shell1[:n_half1]:
        if not _violations(b.edges() + [(a0, b0)], b.positions(), d):
            break
        pb = shell1[n_half1 + shell1.index(pa)]
        b.rotate_branch(pa, BRANCH_ROTATION)
        b.rotate_branch(pb, BRANCH_ROTATION)
        # keep half B an exact image of half A (guards against rounding drift)
        for va, vb in _half_pairs(b, shell1, n_half1):
            b.pos[vb] = c2z @ b.pos[va]

    edges = [(a0, b0)] + b.edges()
    pos = b.positions()
    if _violations(edges, pos, d):  # pragma: no cover - construction guarantee
        raise PlanarInfeasible("could not place dual-center tree without close non-edge pairs")
    graph = TreeGraph(
        n_vertices=len(pos),
        shell_of=tuple(b.shell),
        edges=tuple(edges),
        parent_of=tuple(b.parent),
        kind=TreeKind.DUAL_CENTER,
        Z=3,
        S=3,
    )
    return graph, Geometry(pos, d)


def _half_pairs(b: _Builder, shell1: list[int], n_half1: int):
    pairs = list(zip(shell1[:n_half1], shell1[n_half1:]))
    out = list(pairs)
    for pa, pb in pairs:
        ca = [c for c, p in enumerate(b.parent) if p == pa]
        cb = [c for c, p in enumerate(b.parent) if p == pb]
        out.extend(zip(ca, cb))
    return out


def named_graph(name: str, d: float = 1.0) -> tuple[TreeGraph, Geometry]:
    """``G10``, ``G22`` or ``G14`` with the layout used in the experiments."""
    key = name.upper()
    if key == "G10":
        return build_regular_tree(3, 3, d, Layout.PLANAR)
    if key == "G22":
        return build_regular_tree(3, 4, d, Layout.ROTATED3D)
    if key == "G14":
        return build_dual_center_tree(d)
    raise Unsupported(f"unknown graph {name!r}; expected G10, G22 or G14")


def validate_geometry(graph: TreeGraph, geo: Geometry) -> ValidationReport:
    dist = geo.distances()
    edge_dev = max(
        (abs(dist[j, k] - geo.d) / geo.d for j, k in graph.edges), default=0.0
    )
    eset = graph.edge_set()
    nonedge = [
        dist[j, k]
        for j, k in combinations(range(graph.n_vertices), 2)
        if (j, k) not in eset
    ]
    if not nonedge:
        return ValidationReport(edge_dev, math.inf, 0.0)
    ratio = min(nonedge) / geo.d
    return ValidationReport(edge_dev, ratio, ratio**-6)


# --- geometry files -------------------------------------------------------


def write_geometry(graph: TreeGraph, geo: Geometry, dest: str | Path | TextIO) -> None:
    """``index shell x y z`` per vertex (um, 9 significant digits), then ``edge i j``."""
    buf = io.StringIO()
    buf.write(f"# kind {graph.kind.value} Z {graph.Z} S {graph.S}\n")
    buf.write(f"# d {geo.d:.9g}\n")
    for v in range(graph.n_vertices):
        x, y, z = (0.0 if abs(c) < 1e-12 * geo.d else c for c in geo.positions[v])
        buf.write(f"{v} {graph.shell_of[v]} {x:.9g} {y:.9g} {z:.9g}\n")
    for j, k in graph.edges:
        buf.write(f"edge {j} {k}\n")
    text = buf.getvalue()
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(text)
    else:
        dest.write(text)


def read_geometry(src: str | Path | TextIO) -> tuple[TreeGraph, Geometry]:
    if isinstance(src, (str, Path)):
        lines = Path(src).read_text().splitlines()
    else:
        lines = src.read().splitlines()
    kind, Z, S, d = TreeKind.REGULAR, 3, None, None
    verts: dict[int, tuple[int, tuple[float, float, float]]] = {}
    edges = []
    for raw in lines:
        line = raw.strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] == "#":
            if len(tok) >= 3 and tok[1] == "d":
                d = float(tok[2])
            elif len(tok) >= 7 and tok[1] == "kind":
                kind, Z, S = TreeKind(tok[2]), int(tok[4]), int(tok[6])
            continue
        if tok[0] == "edge":
            edges.append((int(tok[1]), int(tok[2])))
        else:
            verts[int(tok[0])] = (int(tok[1]), (float(tok[2]), float(tok[3]), float(tok[4])))
    n = len(verts)
    shell = tuple(verts[v][0] for v in range(n))
    pos = np.array([verts[v][1] for v in range(n)])
    parent = [-1] * n
    for j, k in edges:
        if shell[k] == shell[j] + 1:
            parent[k] = j
        elif shell[j] == shell[k] + 1:
            parent[j] = k
    if d is None:
        d = float(np.median([np.linalg.norm(pos[j] - pos[k]) for j, k in edges]))
    graph = TreeGraph(n, shell, tuple(edges), tuple(parent), kind, Z, S if S else max(shell) + 1)
    return graph, Geometry(pos, d)
