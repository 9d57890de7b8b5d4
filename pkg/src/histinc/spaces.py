"""Time grids, finite-dimensional spaces and trajectories.

A :class:`DiscreteSpace` stands in for one leg of an evolution triple: the
coefficient space carries two Gram matrices, ``gram_strong`` for the
V-type norm and ``gram_weak`` for the pivot (H-type) norm.  Duality
pairings are plain coefficient dot products; Gram matrices only enter
norms.  A :class:`Trajectory` stores one coefficient vector per node of a
uniform :class:`TimeGrid`.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.linalg as sla

LABELS = ("V", "H", "E", "X", "Y", "Z", "Q")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_k = k*T/N`` for ``k = 0..N``."""

    T: float
    N: int

    def __post_init__(self):
        if not np.isfinite(self.T) or self.T <= 0:
            raise ValueError(f"horizon T must be positive, got {self.T}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"number of steps N must be a positive integer, got {self.N}")
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "N", int(self.N))

    @property
    def dt(self) -> float:
        return self.T / self.N

    @cached_property
    def nodes(self) -> np.ndarray:
        t = np.arange(self.N + 1) * self.dt
        t[-1] = self.T
        t.setflags(write=False)
        return t

    def index(self, t: float) -> int:
        """Node index of an on-grid time ``t``."""
        k = int(round(t / self.dt))
        if k < 0 or k > self.N or abs(k * self.dt - t) > 1e-9 * max(1.0, self.T):
            raise ValueError(f"time {t!r} is not a node of {self}")
        return k


@dataclass(frozen=True, eq=False)
class DiscreteSpace:
    """Coefficient space with strong (SPD) and weak (PSD) Gram matrices."""

    gram_strong: np.ndarray
    gram_weak: np.ndarray | None = None
    label: str = "V"

    def __post_init__(self):
        gs = np.atleast_2d(np.asarray(self.gram_strong, dtype=float))
        gw = gs if self.gram_weak is None else np.atleast_2d(np.asarray(self.gram_weak, dtype=float))
        if gs.shape[0] != gs.shape[1] or gw.shape != gs.shape:
            raise ValueError(f"Gram matrices must be square and of equal size, got {gs.shape}, {gw.shape}")
        scale = max(1.0, float(np.abs(gs).max()))
        if not np.allclose(gs, gs.T, atol=1e-12 * scale) or not np.allclose(gw, gw.T, atol=1e-12 * scale):
            raise ValueError("Gram matrices must be symmetric")
        gs = 0.5 * (gs + gs.T)
        gw = 0.5 * (gw + gw.T)
        ev = np.linalg.eigvalsh(gs)
        if ev[0] <= 0:
            raise ValueError(f"strong Gram matrix must be positive definite (min eigenvalue {ev[0]:.3e})")
        if np.linalg.eigvalsh(gw)[0] < -1e-12 * scale:
            raise ValueError("weak Gram matrix must be positive semidefinite")
        gs.setflags(write=False)
        gw.setflags(write=False)
        object.__setattr__(self, "gram_strong", gs)
        object.__setattr__(self, "gram_weak", gw)

    @classmethod
    def euclidean(cls, dim: int, label: str = "V") -> "DiscreteSpace":
        return cls(np.eye(dim), np.eye(dim), label)

    @property
    def dim(self) -> int:
        return self.gram_strong.shape[0]

    @cached_property
    def _chol(self):
        return sla.cho_factor(self.gram_strong, lower=True)

    @cached_property
    def weak_lmax(self) -> float:
        """Largest eigenvalue of the weak Gram (used to scale step sizes)."""
        return float(np.linalg.eigvalsh(self.gram_weak)[-1])

    def _check(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.dim:
            raise ValueError(f"dimension mismatch: vector of length {v.shape[-1]} in space of dim {self.dim}")
        return v

    def norm(self, v) -> float:
        v = self._check(v)
        return float(np.sqrt(max(v @ self.gram_strong @ v, 0.0)))

    def norm_weak(self, v) -> float:
        v = self._check(v)
        return float(np.sqrt(max(v @ self.gram_weak @ v, 0.0)))

    def norm_dual(self, f) -> float:
        """Norm of a functional ``f`` (coefficients) in the dual of the strong norm."""
        f = self._check(f)
        return float(np.sqrt(max(f @ sla.cho_solve(self._chol, f), 0.0)))

    def norms(self, values: np.ndarray) -> np.ndarray:
        """Strong norms of the rows of ``values``."""
        values = self._check(values)
        q = np.einsum("...i,ij,...j->...", values, self.gram_strong, values)
        return np.sqrt(np.maximum(q, 0.0))

    def dual(self) -> "DiscreteSpace":
        """Space whose strong norm is the dual norm of this one."""
        inv = sla.cho_solve(self._chol, np.eye(self.dim))
        inv = 0.5 * (inv + inv.T)
        return DiscreteSpace(inv, inv, self.label + "*")

    def pivot(self, label: str | None = None) -> "DiscreteSpace":
        """The pivot space (weak norm promoted to strong); needs an SPD weak Gram."""
        if label is None:
            label = {"V": "H", "E": "X"}.get(self.label, self.label + "_w")
        return DiscreteSpace(self.gram_weak, self.gram_weak, label)

    def __repr__(self) -> str:
        return f"DiscreteSpace(label={self.label!r}, dim={self.dim})"


def norm_strong(space: DiscreteSpace, v) -> float:
    return space.norm(v)


def dual_pair(f, v) -> float:
    f = np.asarray(f, dtype=float)
    v = np.asarray(v, dtype=float)
    if f.shape != v.shape:
        raise ValueError(f"dimension mismatch in duality pairing: {f.shape} vs {v.shape}")
    return float(f @ v)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Nodal values ``values[k]`` at ``grid.nodes[k]``, shape ``(N+1, dim)``."""

    space: DiscreteSpace
    grid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim == 1 and self.space.dim == 1:
            vals = vals[:, None]
        if vals.shape != (self.grid.N + 1, self.space.dim):
            raise ValueError(f"trajectory values must have shape {(self.grid.N + 1, self.space.dim)}, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("trajectory contains non-finite values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, space: DiscreteSpace, grid: TimeGrid) -> "Trajectory":
        return cls(space, grid, np.zeros((grid.N + 1, space.dim)))

    @classmethod
    def constant(cls, space: DiscreteSpace, grid: TimeGrid, value) -> "Trajectory":
        value = np.broadcast_to(np.asarray(value, dtype=float), (space.dim,))
        return cls(space, grid, np.tile(value, (grid.N + 1, 1)))

    @classmethod
    def from_function(cls, space: DiscreteSpace, grid: TimeGrid, fn) -> "Trajectory":
        return cls(space, grid, np.array([np.broadcast_to(fn(t), (space.dim,)) for t in grid.nodes]))

    def at(self, t: float) -> np.ndarray:
        return self.values[self.grid.index(t)]

    def __sub__(self, other: "Trajectory") -> "Trajectory":
        return Trajectory(self.space, self.grid, self.values - other.values)

    def __add__(self, other: "Trajectory") -> "Trajectory":
        return Trajectory(self.space, self.grid, self.values + other.values)

    def scaled(self, alpha: float) -> "Trajectory":
        return Trajectory(self.space, self.grid, alpha * self.values)

    def to_csv(self, path=None) -> str:
        """Write ``t,c0,c1,...`` rows with 17 significant digits; return the text."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t"] + [f"c{i}" for i in range(self.space.dim)])
        for t, row in zip(self.grid.nodes, self.values):
            writer.writerow([f"{t:.17g}"] + [f"{x:.17g}" for x in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source, space: DiscreteSpace | None = None) -> "Trajectory":
        """Inverse of :meth:`to_csv`; ``source`` is a path or the CSV text."""
        text = source if isinstance(source, str) and "\n" in source else Path(source).read_text()
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        if not header or header[0] != "t":
            raise ValueError("trajectory CSV must start with a 't' column")
        data = np.array([[float(x) for x in r] for r in body])
        t, vals = data[:, 0], data[:, 1:]
        N = len(t) - 1
        grid = TimeGrid(float(t[-1]), N)
        if space is None:
            space = DiscreteSpace.euclidean(vals.shape[1])
        return cls(space, grid, vals)


def bochner_norm(traj: Trajectory, weight: float = 0.0) -> float:
    """Exponentially weighted discrete L2(0,T) norm, left-endpoint rule."""
    if weight < 0:
        raise ValueError(f"Bielecki weight must be nonnegative, got {weight}")
    g = traj.grid
    sq = traj.space.norms(traj.values[:-1]) ** 2
    return float(np.sqrt(np.sum(g.dt * np.exp(-weight * g.nodes[:-1]) * sq)))


def product_bochner_norm(trajs, weight: float = 0.0) -> float:
    """Norm on a product of trajectory spaces: sum of squared component norms."""
    return float(np.sqrt(sum(bochner_norm(tr, weight) ** 2 for tr in trajs)))


def running_l2(space: DiscreteSpace, values: np.ndarray, dt: float) -> np.ndarray:
    """``sqrt(sum_{j=1..k} dt*|values[j]|^2)`` for every k (implicit-step quadrature)."""
    sq = space.norms(values) ** 2
    sq[0] = 0.0
    return np.sqrt(np.cumsum(dt * sq))


def operator_norm(P, src: DiscreteSpace, dst: DiscreteSpace) -> float:
    """Norm of the coefficient map ``P`` from ``src`` (strong norm) to ``dst`` (strong norm)."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    Ls = np.linalg.cholesky(src.gram_strong)
    Ld = np.linalg.cholesky(dst.gram_strong)
    core = Ld.T @ sla.solve_triangular(Ls, P.T, lower=True).T
    return float(np.linalg.norm(core, 2))
