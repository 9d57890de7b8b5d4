"""Implicit Euler for a single inclusion ``u' + A(t,u) + d psi(t,u) ∋ f``.

``psi`` splits into a convex part, reached through its proximal map, and a
locally Lipschitz part, reached through a subgradient selection.  One time
step solves the stationary inclusion

    0 ∈ Phi(u) + d_c phi(u),   Phi(u) = M (u - prev)/dt + A(t,u) + s(t,u) - f(t)

where ``M`` is the weak Gram matrix.  The solver is forward-backward
splitting ``u <- prox_rho(u - rho Phi(u))`` with type-II Anderson
acceleration (safeguarded: a mixed step is kept only if it lowers the
residual) and backtracking on ``rho``.

Notes
-----
The accuracy certificate of a step is the natural residual

    R(u) = |u - prox_{rho_c}(u - rho_c Phi(u))| / rho_c,   rho_c = dt / lambda_max(M),

measured in coefficients.  It vanishes exactly at solutions and depends on
``u`` and the data only, so it can be recomputed from a stored trajectory.
The working step never exceeds ``rho_c``; since ``|u - T_rho u|/rho`` is
nonincreasing in ``rho``, a working residual below ``tol`` certifies the
step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import GateError, MaxIterations, NonConvergence
from .spaces import DiscreteSpace, TimeGrid, Trajectory

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class StepSolveConfig:
    """Inner solver controls; ``relaxation=None`` picks the initial step from the data."""

    tol: float = 1e-10
    max_inner: int = 500
    relaxation: float | None = None
    backtrack: float = 0.5
    anderson: int = 6

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")
        if self.max_inner < 1:
            raise ValueError("max_inner must be at least 1")
        if self.relaxation is not None and not self.relaxation > 0:
            raise ValueError("relaxation must be positive")


@dataclass(frozen=True, eq=False)
class SingleInclusionProblem:
    """Data of one inclusion.

    ``operator(t, u)`` and ``clarke(t, u)`` return dual coefficient vectors;
    ``convex_prox(t, rho, x)`` is the resolvent of ``rho * d_c phi(t, .)``;
    ``load`` is a dual trajectory or a function of time.  ``lipschitz`` is
    an optional Lipschitz bound of ``operator + clarke`` in coefficients,
    used only for the initial step size.
    """

    space: DiscreteSpace
    operator: Callable
    m_op: float
    initial: np.ndarray
    load: object = None
    convex_prox: Callable | None = None
    clarke: Callable | None = None
    m_psi: float = 0.0
    lipschitz: float | None = None

    def __post_init__(self):
        u0 = np.atleast_1d(np.asarray(self.initial, dtype=float))
        if u0.shape != (self.space.dim,):
            raise ValueError(f"initial value has shape {u0.shape}, expected ({self.space.dim},)")
        object.__setattr__(self, "initial", u0)

    @property
    def margin(self) -> float:
        return self.m_op - self.m_psi

    def load_at(self, t: float) -> np.ndarray:
        if self.load is None:
            return np.zeros(self.space.dim)
        if isinstance(self.load, Trajectory):
            return self.load.at(t)
        return np.broadcast_to(np.asarray(self.load(t), dtype=float), (self.space.dim,))


class _StepMap:
    """Forward map ``Phi`` and forward-backward map at one node."""

    def __init__(self, problem: SingleInclusionProblem, t: float, prev: np.ndarray, dt: float):
        self.p = problem
        self.t = t
        self.M = problem.space.gram_weak
        self.Mprev = self.M @ prev
        self.dt = dt
        self.f = problem.load_at(t)
        self.rho_cert = dt / problem.space.weak_lmax
        self.scale = float(np.linalg.norm(self.Mprev) / dt + np.linalg.norm(self.f))

    def phi(self, u: np.ndarray) -> np.ndarray:
        out = (self.M @ u - self.Mprev) / self.dt + self.p.operator(self.t, u) - self.f
        if self.p.clarke is not None:
            out = out + self.p.clarke(self.t, u)
        return out

    def fb(self, u: np.ndarray, rho: float, phi_u: np.ndarray | None = None) -> np.ndarray:
        x = u - rho * (self.phi(u) if phi_u is None else phi_u)
        if self.p.convex_prox is None:
            return x
        return np.asarray(self.p.convex_prox(self.t, rho, x), dtype=float)

    def residual(self, u: np.ndarray, rho: float | None = None) -> float:
        rho = self.rho_cert if rho is None else rho
        return float(np.linalg.norm(u - self.fb(u, rho)) / rho)

    def floor(self) -> float:
        """Residual level attainable in floating point for this step's data."""
        return 64 * _EPS * self.scale / 1.0


def step_residual(problem: SingleInclusionProblem, t: float, prev, u, dt: float) -> float:
    """Certificate residual of ``u`` as the step from ``prev`` at time ``t``."""
    prev = np.asarray(prev, dtype=float)
    return _StepMap(problem, t, prev, dt).residual(np.asarray(u, dtype=float))


def _initial_rho(sm: _StepMap, u: np.ndarray, cfg: StepSolveConfig) -> float:
    if cfg.relaxation is not None:
        return min(cfg.relaxation, sm.rho_cert)
    L = sm.p.lipschitz
    if L is None:
        # one secant probe of the nonlinear part
        h = 1e-4 * max(1.0, float(np.linalg.norm(u)))
        d = np.random.default_rng(12345).standard_normal(u.size)
        d *= h / np.linalg.norm(d)
        op = lambda x: sm.p.operator(sm.t, x) + (sm.p.clarke(sm.t, x) if sm.p.clarke is not None else 0.0)
        L = float(np.linalg.norm(op(u + d) - op(u)) / h)
    return 1.0 / (sm.p.space.weak_lmax / sm.dt + L)


def _solve_step(problem: SingleInclusionProblem, t: float, prev: np.ndarray, dt: float,
                cfg: StepSolveConfig, guess: np.ndarray | None = None) -> tuple[np.ndarray, float, int]:
    sm = _StepMap(problem, t, prev, dt)
    x = np.array(prev if guess is None else guess, dtype=float)
    tol = max(cfg.tol, sm.floor())
    cert = sm.residual(x)
    if cert <= tol:
        return x, cert, 0
    rho = _initial_rho(sm, x, cfg)
    Tx = sm.fb(x, rho)
    res = float(np.linalg.norm(Tx - x)) / rho
    dF: list[np.ndarray] = []
    dG: list[np.ndarray] = []
    it = 0
    while it < cfg.max_inner:
        if res <= tol:
            cert = sm.residual(x)
            if cert <= tol:
                return x, cert, it
            # only reachable through round-off
            rho *= cfg.backtrack
            Tx = sm.fb(x, rho)
            res = float(np.linalg.norm(Tx - x)) / rho
            dF.clear()
            dG.clear()
        it += 1
        r = Tx - x
        cand = Tx
        if dF:
            F = np.array(dF).T
            gamma, *_ = np.linalg.lstsq(F, r, rcond=None)
            cand = Tx - np.array(dG).T @ gamma
        Tc = sm.fb(cand, rho)
        resc = float(np.linalg.norm(Tc - cand)) / rho
        if not (resc < res) and dF:
            # mixed step rejected: plain forward-backward step instead
            dF.clear()
            dG.clear()
            cand = Tx
            Tc = sm.fb(cand, rho)
            resc = float(np.linalg.norm(Tc - cand)) / rho
        if resc < res:
            dF.append((Tc - cand) - r)
            dG.append(Tc - Tx)
            if len(dF) > cfg.anderson:
                dF.pop(0)
                dG.pop(0)
            x, Tx, res = cand, Tc, resc
        else:
            rho *= cfg.backtrack
            dF.clear()
            dG.clear()
            Tx = sm.fb(x, rho)
            res = float(np.linalg.norm(Tx - x)) / rho
    cert = sm.residual(x)
    if cert <= tol:
        return x, cert, it
    raise MaxIterations("step solve did not reach tolerance", residual=cert, iterations=it)


def step_solve(t: float, prev, dt: float, problem: SingleInclusionProblem,
               cfg: StepSolveConfig | None = None, guess=None) -> np.ndarray:
    """One implicit Euler step; returns the new coefficient vector."""
    cfg = cfg or StepSolveConfig()
    u, _, _ = _solve_step(problem, t, np.asarray(prev, dtype=float), dt, cfg,
                          None if guess is None else np.asarray(guess, dtype=float))
    return u


@dataclass(frozen=True)
class InclusionRun:
    trajectory: Trajectory
    residuals: np.ndarray
    inner_iterations: np.ndarray


def solve_inclusion(problem: SingleInclusionProblem, grid: TimeGrid, cfg: StepSolveConfig | None = None,
                    guesses: np.ndarray | None = None, return_run: bool = False):
    """March implicit Euler over ``grid``.

    ``guesses`` (shape ``(N+1, dim)``) optionally seeds the inner iteration
    at each node; the default seed is the previous nodal value.
    """
    cfg = cfg or StepSolveConfig()
    if not problem.margin > 0:
        raise GateError(f"m_A > m_psi fails (margin {problem.margin:g})", (problem.margin,))
    vals = np.empty((grid.N + 1, problem.space.dim))
    vals[0] = problem.initial
    res = np.zeros(grid.N + 1)
    its = np.zeros(grid.N + 1, dtype=int)
    t = grid.nodes
    for k in range(1, grid.N + 1):
        g = None if guesses is None else guesses[k]
        try:
            vals[k], res[k], its[k] = _solve_step(problem, t[k], vals[k - 1], grid.dt, cfg, g)
        except NonConvergence as exc:
            raise exc.annotate(node=k) from None
    traj = Trajectory(problem.space, grid, vals)
    if return_run:
        return InclusionRun(traj, res, its)
    return traj
