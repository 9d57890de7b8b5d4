"""Structured triangulations of a rectangle with tagged boundary parts."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError

DIRICHLET, NEUMANN, CONTACT = "D", "N", "C"
TAGS = (DIRICHLET, NEUMANN, CONTACT)
DEFAULT_SIDES = {"left": DIRICHLET, "right": DIRICHLET, "bottom": CONTACT, "top": NEUMANN}


@dataclass(frozen=True, eq=False)
class Mesh2D:
    """P1 triangulation of ``[0, Lx] x [0, Ly]``.

    ``boundary_edges[i]`` is a node pair oriented counter-clockwise around
    the domain and ``boundary_tags[i]`` its part (``"D"``, ``"N"`` or ``"C"``).
    """

    Lx: float
    Ly: float
    nx: int
    ny: int
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: tuple

    def __post_init__(self):
        self.validate()

    @classmethod
    def rectangle(cls, Lx: float = 1.0, Ly: float = 1.0, nx: int = 8, ny: int = 4, sides: dict | None = None) -> "Mesh2D":
        """Cells split along ``/`` on the left half and ``\\`` on the right half.

        The split is mirror symmetric about ``x = Lx/2`` when ``nx`` is even.
        ``sides`` maps ``left/right/bottom/top`` to a tag.
        """
        if nx < 1 or ny < 1:
            raise ConfigurationError(f"cell counts must be positive, got {nx}x{ny}", "mesh")
        if not (Lx > 0 and Ly > 0):
            raise ConfigurationError(f"rectangle sides must be positive, got {Lx}x{Ly}", "mesh")
        tags = dict(DEFAULT_SIDES)
        if sides:
            unknown = set(sides) - set(tags)
            if unknown:
                raise ConfigurationError(f"unknown sides {sorted(unknown)}", "mesh.sides")
            tags.update(sides)
        xs, ys = np.linspace(0.0, Lx, nx + 1), np.linspace(0.0, Ly, ny + 1)
        X, Y = np.meshgrid(xs, ys)
        nodes = np.column_stack([X.ravel(), Y.ravel()])
        idx = lambda i, j: j * (nx + 1) + i
        tris = []
        for j in range(ny):
            for i in range(nx):
                a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
                if 2 * i < nx:
                    tris += [(a, b, c), (a, c, d)]
                else:
                    tris += [(a, b, d), (b, c, d)]
        edges, etags = [], []
        for i in range(nx):
            edges.append((idx(i, 0), idx(i + 1, 0)))
            etags.append(tags["bottom"])
        for j in range(ny):
            edges.append((idx(nx, j), idx(nx, j + 1)))
            etags.append(tags["right"])
        for i in range(nx, 0, -1):
            edges.append((idx(i, ny), idx(i - 1, ny)))
            etags.append(tags["top"])
        for j in range(ny, 0, -1):
            edges.append((idx(0, j), idx(0, j - 1)))
            etags.append(tags["left"])
        return cls(float(Lx), float(Ly), nx, ny, nodes, np.array(tris, dtype=int), np.array(edges, dtype=int),
                   tuple(etags))

    def validate(self) -> None:
        tris = np.asarray(self.triangles)
        p = self.nodes[tris]
        signed = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
        if np.any(signed <= 0):
            raise ConfigurationError("triangles must be non-degenerate and counter-clockwise", "mesh")
        count = Counter()
        for t in tris:
            for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
                count[frozenset((int(a), int(b)))] += 1
        if any(c > 2 for c in count.values()):
            raise ConfigurationError("non-conforming triangulation: an edge is shared by more than two triangles", "mesh")
        boundary = {e for e, c in count.items() if c == 1}
        tagged = Counter(frozenset(map(int, e)) for e in self.boundary_edges)
        if any(c > 1 for c in tagged.values()):
            raise ConfigurationError("a boundary edge is tagged more than once", "mesh.boundary_tags")
        if set(tagged) != boundary:
            raise ConfigurationError("tagged edges do not match the boundary of the triangulation", "mesh.boundary_tags")
        if len(self.boundary_tags) != len(self.boundary_edges) or any(t not in TAGS for t in self.boundary_tags):
            raise ConfigurationError(f"boundary tags must be one of {TAGS}", "mesh.boundary_tags")
        if self.part_length(DIRICHLET) <= 0:
            raise ConfigurationError("the Dirichlet part must have positive length", "mesh.boundary_tags")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def edges_of(self, tag: str) -> np.ndarray:
        mask = np.array([t == tag for t in self.boundary_tags], dtype=bool)
        return self.boundary_edges[mask].reshape(-1, 2)

    def part_length(self, tag: str) -> float:
        e = self.edges_of(tag)
        return float(np.linalg.norm(self.nodes[e[:, 1]] - self.nodes[e[:, 0]], axis=1).sum())

    def nodes_of(self, tag: str) -> np.ndarray:
        return np.unique(self.edges_of(tag))

    def mirror_permutation(self) -> np.ndarray:
        """``perm[a]`` is the node at the reflection of node ``a`` about ``x = Lx/2``."""
        i = np.rint(self.nodes[:, 0] / self.Lx * self.nx).astype(int)
        j = np.rint(self.nodes[:, 1] / self.Ly * self.ny).astype(int)
        return j * (self.nx + 1) + (self.nx - i)
