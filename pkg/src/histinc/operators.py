"""Operator families, potentials and history-dependent operators.

Every family carries the constants it is declared to satisfy (its
"ledger").  Clarke potentials are represented by a single-valued
selection of their generalized gradient; convex potentials are accessed
through their proximal map (the Euclidean resolvent in coefficients).
History operators see only the nodes strictly before the evaluation node,
so the time discretisation of every memory term is a left-rectangle rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .spaces import DiscreteSpace, TimeGrid, Trajectory


def _timefn(c) -> Callable[[float], float]:
    if callable(c):
        return c
    c = float(c)
    return lambda t: c


def _vec(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class OperatorFamilyA:
    """``A(t, theta, v)``: V* valued, strongly monotone in ``v``.

    Declared: ``<A(t,th1,v1) - A(t,th2,v2), v1-v2> >= m_A|v1-v2|^2 - mbar_A|th1-th2||v1-v2|``
    and ``|A(t,th,v)| <= a0(t) + a1|th| + a2|v|``.
    """

    fn: Callable
    m_A: float
    mbar_A: float = 0.0
    a0: float | Callable = 0.0
    a1: float = 0.0
    a2: float = 0.0

    def __post_init__(self):
        if not self.m_A > 0:
            raise ValueError(f"m_A must be positive, got {self.m_A}")

    def __call__(self, t, theta, v):
        return _vec(self.fn(t, theta, v))

    def growth_terms(self, t):
        return _timefn(self.a0)(t), (self.a1, self.a2)


@dataclass(frozen=True)
class OperatorFamilyB:
    """``B(t, w, wbar, theta)``: E* valued, strongly monotone in ``theta``."""

    fn: Callable
    m_B: float
    mbar_B: float = 0.0
    b0: float | Callable = 0.0
    b1: float = 0.0
    b2: float = 0.0
    b3: float = 0.0

    def __post_init__(self):
        if not self.m_B > 0:
            raise ValueError(f"m_B must be positive, got {self.m_B}")

    def __call__(self, t, w, wbar, theta):
        return _vec(self.fn(t, w, wbar, theta))

    def growth_terms(self, t):
        return _timefn(self.b0)(t), (self.b1, self.b2, self.b3)


def _sampled_dirderiv(selection, point, d, rng, n=8, radius=1e-6):
    """Max of <s(y), d> over the base point and nearby points y (G^0 surrogate)."""
    best = float(selection(point) @ d)
    scale = radius * max(1.0, float(np.linalg.norm(point)))
    for i in range(n):
        y = point + scale * 0.5 ** i * rng.standard_normal(point.shape)
        best = max(best, float(selection(y) @ d))
    return best


@dataclass(frozen=True)
class ClarkePotentialJ:
    """Locally Lipschitz ``J(t, theta, z, v)`` via a selection of its Clarke gradient in ``v``."""

    subgrad: Callable
    m_J: float = 0.0
    mbar_J: float = 0.0
    c0J: float | Callable = 0.0
    c1J: float = 0.0
    c2J: float = 0.0
    c3J: float = 0.0
    value: Callable | None = None
    dirderiv_upper: Callable | None = None

    def __call__(self, t, theta, z, v):
        return _vec(self.subgrad(t, theta, z, v))

    def growth_terms(self, t):
        return _timefn(self.c0J)(t), (self.c1J, self.c2J, self.c3J)

    def dirderiv(self, t, theta, z, v, d, rng=None):
        """Surrogate of ``J^0(t,theta,z,v; d)``."""
        if self.dirderiv_upper is not None:
            return float(self.dirderiv_upper(t, theta, z, v, d))
        rng = np.random.default_rng(0) if rng is None else rng
        return _sampled_dirderiv(lambda y: self(t, theta, z, y), _vec(v), _vec(d), rng)


@dataclass(frozen=True)
class ClarkePotentialG:
    """Locally Lipschitz ``g(t, w, theta)`` via a selection of its Clarke gradient in ``theta``."""

    subgrad: Callable
    m_g: float = 0.0
    mbar_g: float = 0.0
    c0g: float | Callable = 0.0
    c1g: float = 0.0
    c2g: float = 0.0
    value: Callable | None = None

    def __call__(self, t, w, theta):
        return _vec(self.subgrad(t, w, theta))

    def growth_terms(self, t):
        return _timefn(self.c0g)(t), (self.c1g, self.c2g)


@dataclass(frozen=True)
class ConvexPotentialPhi:
    """Convex ``phi(t, theta, y, v)`` accessed through ``prox(t, theta, y, rho, x)``.

    ``prox`` returns the minimiser of ``phi(...,u) + |u - x|^2/(2 rho)``
    (Euclidean in coefficients, consistent with the coefficient duality).
    """

    prox: Callable
    m_phi: float = 0.0
    c0phi: float | Callable = 0.0
    c1phi: float = 0.0
    c2phi: float = 0.0
    c3phi: float = 0.0
    value: Callable | None = None
    subgrad: Callable | None = None

    def resolvent(self, t, theta, y, rho, x):
        return _vec(self.prox(t, theta, y, rho, x))

    def growth_terms(self, t):
        return _timefn(self.c0phi)(t), (self.c1phi, self.c2phi, self.c3phi)


def zero_potential_J() -> ClarkePotentialJ:
    return ClarkePotentialJ(lambda t, th, z, v: np.zeros_like(_vec(v)), value=lambda t, th, z, v: 0.0)


def zero_potential_G() -> ClarkePotentialG:
    return ClarkePotentialG(lambda t, w, th: np.zeros_like(_vec(th)), value=lambda t, w, th: 0.0)


def zero_potential_phi() -> ConvexPotentialPhi:
    return ConvexPotentialPhi(lambda t, th, y, rho, x: _vec(x).copy(), value=lambda t, th, y, v: 0.0)


def soft_threshold(x, thresh):
    """Prox of ``thresh*|.|_1``; ``thresh`` may be a vector."""
    return np.sign(x) * np.maximum(np.abs(x) - thresh, 0.0)


def growth_bound(family, t: float, inputs) -> float:
    """Affine growth envelope ``c0(t) + sum_i c_i * inputs[i]`` of a family."""
    c0, coeffs = family.growth_terms(t)
    inputs = tuple(inputs)
    if len(inputs) > len(coeffs):
        raise ValueError(f"{type(family).__name__} takes at most {len(coeffs)} norm inputs")
    return float(c0 + sum(c * x for c, x in zip(coeffs, inputs)))


# --------------------------------------------------------------------------
# history operators


@dataclass(frozen=True, eq=False)
class HistoryOperator:
    """Causal operator ``L2(0,T;V) -> L2(0,T;target)``.

    Subclasses implement :meth:`_eval_prefix`, which receives only the
    nodal values strictly before the evaluation node.
    """

    target_space: DiscreteSpace
    lipschitz_const: float

    def __post_init__(self):
        if self.lipschitz_const < 0:
            raise ValueError("Lipschitz constant must be nonnegative")

    def _eval_prefix(self, prefix: np.ndarray, grid: TimeGrid, k: int) -> np.ndarray:
        raise NotImplementedError

    def _eval_all(self, values: np.ndarray, grid: TimeGrid) -> np.ndarray:
        return np.array([self._eval_prefix(values[:k], grid, k) for k in range(grid.N + 1)])

    @property
    def is_zero(self) -> bool:
        return False


@dataclass(frozen=True, eq=False)
class ZeroHistory(HistoryOperator):
    lipschitz_const: float = 0.0

    def _eval_prefix(self, prefix, grid, k):
        return np.zeros(self.target_space.dim)

    def _eval_all(self, values, grid):
        return np.zeros((grid.N + 1, self.target_space.dim))

    @property
    def is_zero(self) -> bool:
        return True


def _offset(op) -> np.ndarray:
    if op.offset is None:
        return np.zeros(op.target_space.dim)
    return np.broadcast_to(_vec(op.offset), (op.target_space.dim,)).astype(float)


def _left_sums(values: np.ndarray, dt: float) -> np.ndarray:
    """Row k holds ``sum_{j<k} dt*values[j]`` (sequential, so prefix-stable)."""
    out = np.zeros((values.shape[0] + 1,) + values.shape[1:])
    np.cumsum(dt * values, axis=0, out=out[1:])
    return out


@dataclass(frozen=True, eq=False)
class VolterraKernel(HistoryOperator):
    """``offset + int_0^t K(t,s) v(s) ds``; ``kernel`` returns a matrix or a scalar.

    With ``stationary=True`` the kernel is taken to depend on ``t - s`` only
    and is sampled at the ``N`` lags.  Kernel tables are cached per grid.
    """

    kernel: Callable = None
    offset: np.ndarray | None = None
    stationary: bool = False
    _tables: dict = field(default_factory=dict, repr=False)

    def _K(self, t, s, n_in):
        K = np.asarray(self.kernel(t, s), dtype=float)
        if K.ndim == 0:
            K = K * np.eye(self.target_space.dim, n_in)
        return K

    def _table(self, grid: TimeGrid, n_in: int) -> np.ndarray:
        """``tab[k, j] = K(t_k, t_j)`` for ``j < k``, or ``tab[m] = K(t_m, 0)`` if stationary."""
        key = (grid.T, grid.N, n_in)
        tab = self._tables.get(key)
        if tab is None:
            t = grid.nodes
            d = self.target_space.dim
            if self.stationary:
                tab = np.zeros((grid.N + 1, d, n_in))
                for m in range(1, grid.N + 1):
                    tab[m] = self._K(t[m], t[0], n_in)
            else:
                tab = np.zeros((grid.N + 1, grid.N + 1, d, n_in))
                for k in range(1, grid.N + 1):
                    for j in range(k):
                        tab[k, j] = self._K(t[k], t[j], n_in)
            self._tables[key] = tab
        return tab

    def _column(self, tab, j, rows):
        # kernel blocks K(t_k, t_j) for the nodes k in ``rows``
        if self.stationary:
            return tab[rows - j]
        return tab[rows, j]

    def _eval_prefix(self, prefix, grid, k):
        out = _offset(self).copy()
        if k == 0:
            return out
        tab = self._table(grid, prefix.shape[1])
        rows = np.array([k])
        for j in range(k):
            out += grid.dt * (self._column(tab, j, rows)[0] * prefix[j]).sum(-1)
        return out

    def _eval_all(self, values, grid):
        tab = self._table(grid, values.shape[1])
        out = np.tile(_offset(self), (grid.N + 1, 1))
        for j in range(grid.N):
            rows = np.arange(j + 1, grid.N + 1)
            out[j + 1:] += grid.dt * (self._column(tab, j, rows) * values[j]).sum(-1)
        return out


@dataclass(frozen=True, eq=False)
class IntegralOfMap(HistoryOperator):
    """``offset + int_0^t map(v(s)) ds``."""

    map: Callable = None
    offset: np.ndarray | None = None

    def _mapped(self, values):
        return np.array([_vec(self.map(v)) for v in values]).reshape(len(values), self.target_space.dim)

    def _eval_prefix(self, prefix, grid, k):
        if k == 0:
            return _offset(self).copy()
        return _offset(self) + _left_sums(self._mapped(prefix), grid.dt)[-1]

    def _eval_all(self, values, grid):
        return _offset(self) + _left_sums(self._mapped(values[:-1]), grid.dt)


@dataclass(frozen=True, eq=False)
class AccumulateThenMap(HistoryOperator):
    """``post(offset + int_0^t v(s) ds)``; ``offset`` lives in the source space."""

    post: Callable = None
    offset: np.ndarray | None = None

    def _acc(self, sums):
        if self.offset is None:
            return sums
        return sums + _vec(self.offset)

    def _eval_prefix(self, prefix, grid, k):
        if k == 0:
            base = np.zeros(prefix.shape[1]) if self.offset is None else _vec(self.offset)
            return _vec(self.post(base))
        return _vec(self.post(self._acc(_left_sums(prefix, grid.dt)[-1])))

    def _eval_all(self, values, grid):
        acc = self._acc(_left_sums(values[:-1], grid.dt))
        return np.array([_vec(self.post(a)) for a in acc])


@dataclass(frozen=True, eq=False)
class CustomHistory(HistoryOperator):
    """Arbitrary causal map: ``fn(prefix, grid, k)`` with ``prefix = values[:k]``."""

    fn: Callable = None
    fn_all: Callable | None = None

    def _eval_prefix(self, prefix, grid, k):
        return _vec(self.fn(prefix, grid, k))

    def _eval_all(self, values, grid):
        if self.fn_all is not None:
            return np.asarray(self.fn_all(values, grid), dtype=float)
        return super()._eval_all(values, grid)


def history_eval(op: HistoryOperator, traj: Trajectory, k: int) -> np.ndarray:
    """Value of ``op(traj)`` at node ``k`` (uses nodes ``0..k-1`` only)."""
    if not 0 <= k <= traj.grid.N:
        raise ValueError(f"node index {k} out of range 0..{traj.grid.N}")
    return op._eval_prefix(traj.values[:k], traj.grid, k)


def history_apply(op: HistoryOperator, traj: Trajectory) -> Trajectory:
    """``op(traj)`` at every node, as a trajectory in the target space."""
    vals = op._eval_all(traj.values, traj.grid)
    return Trajectory(op.target_space, traj.grid, np.asarray(vals).reshape(traj.grid.N + 1, op.target_space.dim))
