"""Differential variational-hemivariational inequality (DVHI) as a coupled system.

The DVHI couples

    <u' + Abar(t,u), v - u> + G^0(t, theta, Mu; Mv - Mu) + phi(t,theta,v) - phi(t,theta,u)
        >= <F(t,theta), v - u>,
    theta' + Bbar(t, theta) = f(t, theta, vartheta u),

and is rewritten as a :class:`~histinc.system.SystemProblem` with

    A(t,theta,v) = Abar(t,v),          J(t,theta,z,v) = G(t,theta,Mv) - <F(t,theta), v>,
    B(t,v,vbar,theta) = Bbar(t,theta) - f(t,theta,vartheta v),   g = 0, h1 = h2 = 0,

and no memory terms.  The solution is computed in inclusion form and the
inequality form is checked afterwards by :func:`check_inequality_residual`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .benchmark import random_spd, sawtooth
from .errors import ConfigurationError, GateError, NonConvergence
from .operators import (
    ClarkePotentialJ, ConvexPotentialPhi, OperatorFamilyA, OperatorFamilyB, ZeroHistory, _sampled_dirderiv, _timefn,
    _vec, soft_threshold, zero_potential_G,
)
from .probes import check_smallness
from .spaces import DiscreteSpace, TimeGrid, Trajectory, operator_norm
from .system import SystemConfig, SystemProblem, solve_system

LINEARITY_TOL = 1e-12
POWER_TOL = 1e-12


# --------------------------------------------------------------------------
# data


@dataclass(frozen=True)
class MonotoneOperator:
    """``fn(t, x)`` with strong monotonicity ``m`` and growth ``c0(t) + c1|x|``."""

    fn: Callable
    m: float
    c0: float | Callable = 0.0
    c1: float = 0.0

    def __call__(self, t, x):
        return _vec(self.fn(t, x))


@dataclass(frozen=True)
class ConstraintPotential:
    """Locally Lipschitz ``G(t, theta, x)`` on ``X0`` through a Clarke selection in ``x``.

    Declared: ``G^0(th1,x1;x2-x1) + G^0(th2,x2;x1-x2) <= m_G|dx|^2 + mbar_G|dth||dx|``
    and ``|dG(t,th,x)| <= c0G(t) + c1G|th| + c2G|x|``.
    """

    subgrad: Callable
    m_G: float = 0.0
    mbar_G: float = 0.0
    c0G: float | Callable = 0.0
    c1G: float = 0.0
    c2G: float = 0.0
    value: Callable | None = None

    def __call__(self, t, theta, x):
        return _vec(self.subgrad(t, theta, x))


@dataclass(frozen=True)
class LipschitzSource:
    """``F(t, theta)`` in V*, Lipschitz in ``theta`` with ``L_F``; growth ``c0F(t) + c1F|theta|``."""

    fn: Callable
    L_F: float = 0.0
    c0F: float | Callable = 0.0
    c1F: float = 0.0

    def __call__(self, t, theta):
        return _vec(self.fn(t, theta))


@dataclass(frozen=True)
class CoupledSource:
    """``f(t, theta, y)`` in E*: Lipschitz in ``y`` (``L_f``), one-sided Lipschitz in ``theta`` (``L_os``)."""

    fn: Callable
    L_f: float = 0.0
    L_os: float = 0.0
    c0f: float | Callable = 0.0
    c1f: float = 0.0
    c2f: float = 0.0

    def __call__(self, t, theta, y):
        return _vec(self.fn(t, theta, y))


def zero_convex_potential() -> ConvexPotentialPhi:
    """``phi = 0`` in the y-free calling convention ``prox(t, theta, rho, x)``."""
    return ConvexPotentialPhi(lambda t, th, rho, x: _vec(x).copy(), value=lambda t, th, v: 0.0)


@dataclass(frozen=True, eq=False)
class DvhiProblem:
    """Data of the DVHI.

    ``mapM`` (V -> X0) and ``mapTheta`` (H -> Y0) are matrices or linear
    callables on coefficient vectors.  ``potPhi`` uses the y-free
    convention ``prox(t, theta, rho, x)`` and ``value(t, theta, v)``.
    """

    V: DiscreteSpace
    E: DiscreteSpace
    X0: DiscreteSpace
    Y0: DiscreteSpace
    opAbar: MonotoneOperator
    potG: ConstraintPotential
    mapM: object
    mapTheta: object
    rhsF: LipschitzSource
    opBbar: MonotoneOperator
    rhsf: CoupledSource
    u0: np.ndarray
    theta0: np.ndarray
    potPhi: ConvexPotentialPhi = field(default_factory=zero_convex_potential)

    def __post_init__(self):
        u0 = np.atleast_1d(np.asarray(self.u0, dtype=float))
        th0 = np.atleast_1d(np.asarray(self.theta0, dtype=float))
        if u0.shape != (self.V.dim,):
            raise ConfigurationError(f"u0 has shape {u0.shape}, V has dim {self.V.dim}", "u0")
        if th0.shape != (self.E.dim,):
            raise ConfigurationError(f"theta0 has shape {th0.shape}, E has dim {self.E.dim}", "theta0")
        object.__setattr__(self, "u0", u0)
        object.__setattr__(self, "theta0", th0)
        object.__setattr__(self, "mapM", linear_matrix(self.mapM, self.V.dim, self.X0.dim, "mapM"))
        object.__setattr__(self, "mapTheta", linear_matrix(self.mapTheta, self.V.dim, self.Y0.dim, "mapTheta"))

    @property
    def H(self) -> DiscreteSpace:
        return self.V.pivot("H")

    @property
    def X(self) -> DiscreteSpace:
        return self.E.pivot("X")

    @cached_property
    def norm_M(self) -> float:
        return power_iteration_norm(self.mapM, self.V, self.X0)

    @cached_property
    def norm_theta(self) -> float:
        return power_iteration_norm(self.mapTheta, self.H, self.Y0)

    @property
    def constants(self) -> dict:
        """Declared constants entering the mapping onto the system ledger."""
        return {
            "m_Abar": self.opAbar.m, "m_G": self.potG.m_G, "mbar_G": self.potG.mbar_G, "norm_M": self.norm_M,
            "L_F": self.rhsF.L_F, "m_phi": self.potPhi.m_phi, "m_Bbar": self.opBbar.m, "L_os": self.rhsf.L_os,
            "L_f": self.rhsf.L_f, "norm_theta": self.norm_theta,
        }


# --------------------------------------------------------------------------
# linear maps and their norms


def linear_matrix(op, n_in: int, n_out: int, name: str = "map") -> np.ndarray:
    """Matrix of a linear map given as an array or a callable; callables are
    checked for additivity and homogeneity on random samples."""
    if not callable(op):
        P = np.atleast_2d(np.asarray(op, dtype=float))
        if P.shape != (n_out, n_in):
            raise ConfigurationError(f"{name} has shape {P.shape}, expected {(n_out, n_in)}", name)
        return P
    P = np.column_stack([_vec(op(e)) for e in np.eye(n_in)]) if n_in else np.zeros((n_out, 0))
    if P.shape != (n_out, n_in):
        raise ConfigurationError(f"{name} returns vectors of the wrong size", name)
    rng = np.random.default_rng(7)
    for _ in range(8):
        x, y = rng.standard_normal((2, n_in))
        a, b = rng.standard_normal(2)
        lhs = _vec(op(a * x + b * y))
        rhs = a * _vec(op(x)) + b * _vec(op(y))
        scale = max(1.0, float(np.linalg.norm(rhs)), abs(a) * float(np.linalg.norm(op(x))),
                    abs(b) * float(np.linalg.norm(op(y))))
        if np.linalg.norm(lhs - rhs) > LINEARITY_TOL * scale:
            raise ConfigurationError(f"{name} is not linear (defect {np.linalg.norm(lhs - rhs):.3g})", name)
    return P


def power_iteration_norm(P: np.ndarray, src: DiscreteSpace, dst: DiscreteSpace, tol: float = POWER_TOL,
                         max_iter: int = 100000, strict: bool = False) -> float:
    """Operator norm of ``P: src -> dst`` by power iteration on ``P^T G_dst P`` in the ``G_src`` geometry.

    With ``strict`` an exhausted iteration budget raises :class:`NonConvergence`
    instead of returning the last Rayleigh quotient.
    """
    P = np.asarray(P, dtype=float)
    if P.size == 0 or not np.any(P):
        return 0.0
    Gs, Gd = src.gram_strong, dst.gram_strong
    K = P.T @ Gd @ P
    chol = sla.cho_factor(Gs, lower=True)
    x = np.random.default_rng(11).standard_normal(P.shape[1])
    x /= math.sqrt(float(x @ Gs @ x))
    lam, change = 0.0, math.inf
    for _ in range(max_iter):
        y = sla.cho_solve(chol, K @ x)
        lam_new = float(x @ K @ x)
        ny = math.sqrt(float(y @ Gs @ y))
        if ny == 0.0:
            return 0.0
        x = y / ny
        change = abs(lam_new - lam)
        if change <= tol * lam_new:
            lam = max(lam_new, float(x @ K @ x))
            break
        lam = lam_new
    else:
        if strict:
            raise NonConvergence("power iteration for an operator norm did not settle", change / lam,
                                 max_iter, stage="power_iteration")
    return math.sqrt(lam)


# --------------------------------------------------------------------------
# reduction


def map_constants(c: dict) -> dict:
    """System ledger entries implied by DVHI constants (exact arithmetic)."""
    return {
        "m_A": c["m_Abar"], "mbar_A": 0.0,
        "m_J": c["m_G"] * c["norm_M"] ** 2, "mbar_J": c["mbar_G"] * c["norm_M"] + c["L_F"],
        "m_B": c["m_Bbar"] - c["L_os"], "mbar_B": c["L_f"] * c["norm_theta"],
        "m_g": 0.0, "mbar_g": 0.0,
    }


def embedding_constant(V: DiscreteSpace) -> float:
    """Smallest ``c`` with ``|v|_H <= c |v|_V``."""
    return operator_norm(np.eye(V.dim), V, V.pivot())


def build_system(dvhi: DvhiProblem) -> SystemProblem:
    """The coupled system whose solution solves the DVHI."""
    consts = dvhi.constants
    gate = check_smallness({"kind": "dvhi", **consts})
    if not gate.passed:
        raise GateError(f"DVHI smallness violated: {gate.condition}; margins {gate.margins}", gate.margins)
    if embedding_constant(dvhi.V) > 1.0 + 1e-12:
        raise ConfigurationError("the V norm must dominate the H norm for the coupling constant to hold", "V")
    led = map_constants(consts)
    nM, nth = consts["norm_M"], consts["norm_theta"]
    Abar, G, F, Bbar, f = dvhi.opAbar, dvhi.potG, dvhi.rhsF, dvhi.opBbar, dvhi.rhsf
    M, Th = dvhi.mapM, dvhi.mapTheta
    one = DiscreteSpace.euclidean(1)

    opA = OperatorFamilyA(lambda t, th, v: Abar(t, v), m_A=led["m_A"], mbar_A=0.0, a0=Abar.c0, a1=0.0, a2=Abar.c1)
    c0G, c0F = _timefn(G.c0G), _timefn(F.c0F)
    potJ = ClarkePotentialJ(
        lambda t, th, z, v: M.T @ G(t, th, M @ v) - F(t, th),
        m_J=led["m_J"], mbar_J=led["mbar_J"],
        c0J=lambda t: nM * c0G(t) + c0F(t), c1J=nM * G.c1G + F.c1F, c2J=0.0, c3J=nM ** 2 * G.c2G,
        value=None if G.value is None else (lambda t, th, z, v: G.value(t, th, M @ v) - float(F(t, th) @ v)),
    )
    phi = dvhi.potPhi
    potPhi = ConvexPotentialPhi(
        lambda t, th, y, rho, x: _vec(phi.prox(t, th, rho, x)), m_phi=phi.m_phi,
        c0phi=phi.c0phi, c1phi=phi.c1phi, c2phi=0.0, c3phi=phi.c3phi,
        value=None if phi.value is None else (lambda t, th, y, v: phi.value(t, th, v)),
        subgrad=None if phi.subgrad is None else (lambda t, th, y, v: phi.subgrad(t, th, v)),
    )
    c0f = _timefn(f.c0f)
    opB = OperatorFamilyB(
        lambda t, w, wb, th: Bbar(t, th) - f(t, th, Th @ w), m_B=led["m_B"], mbar_B=led["mbar_B"],
        b0=lambda t: _timefn(Bbar.c0)(t) + c0f(t), b1=f.c2f * nth, b2=0.0, b3=Bbar.c1 + f.c1f,
    )
    return SystemProblem(dvhi.V, dvhi.E, one, one, one, opA, potJ, potPhi, opB, zero_potential_G(),
                         ZeroHistory(one), ZeroHistory(dvhi.V.dual()), ZeroHistory(one), ZeroHistory(one),
                         dvhi.u0, dvhi.theta0)


def solve_dvhi(dvhi: DvhiProblem, grid: TimeGrid, cfg: SystemConfig | None = None):
    """Returns ``(u, theta, diagnostics)``; the ledger mapping is in ``diagnostics.extra``."""
    system = build_system(dvhi)
    u, theta, diag = solve_system(system, grid, cfg)
    diag.extra["ledger_mapping"] = {"dvhi": dvhi.constants, "system": map_constants(dvhi.constants)}
    return u, theta, diag


# --------------------------------------------------------------------------
# a-posteriori check of the inequality form


@dataclass
class InequalityReport:
    min_slack: float
    worst_node: int
    theta_residual: float
    n_directions: int
    n_nodes: int

    def to_dict(self) -> dict:
        return {"min_slack": float(self.min_slack), "worst_node": int(self.worst_node),
                "theta_residual": float(self.theta_residual), "n_directions": self.n_directions,
                "n_nodes": self.n_nodes}


def check_inequality_residual(dvhi: DvhiProblem, u: Trajectory, theta: Trajectory, grid: TimeGrid,
                              n_test_dirs: int = 64, seed: int = 0, directions=None) -> InequalityReport:
    """Smallest left-minus-right value of the inequality over nodes and test points.

    Test points are ``v = u(t_k) + d``.  Directions ``d`` are drawn with
    radii log-uniform in ``[0.1, 10]`` times ``max(1, |u(t_k)|_V)`` unless
    given explicitly (shape ``(n, dim V)``).  ``G^0`` is replaced by a
    sampled surrogate that is never below the pairing with the stored
    selection, so the reported slack is conservative.
    """
    rng = np.random.default_rng(seed)
    V, E = dvhi.V, dvhi.E
    MV, ME = V.gram_weak, E.gram_weak
    M, Th = dvhi.mapM, dvhi.mapTheta
    phi = dvhi.potPhi
    if phi.value is None:
        raise ConfigurationError("the inequality check needs phi values", "potPhi")
    U, TH = u.values, theta.values
    dt = grid.dt
    worst, worst_k, th_res = math.inf, 0, 0.0
    for k in range(1, grid.N + 1):
        t = grid.nodes[k]
        uk, thk = U[k], TH[k]
        smooth = MV @ (uk - U[k - 1]) / dt + dvhi.opAbar(t, uk) - dvhi.rhsF(t, thk)
        Mu = M @ uk
        sel = lambda x: dvhi.potG(t, thk, x)
        phi_u = phi.value(t, thk, uk)
        if directions is None:
            scale = max(1.0, V.norm(uk))
            dirs = []
            for _ in range(n_test_dirs):
                d = rng.standard_normal(V.dim)
                r = math.exp(rng.uniform(math.log(0.1), math.log(10.0)))
                dirs.append(d * (r * scale / V.norm(d)))
        else:
            dirs = list(np.atleast_2d(directions))
        for d in dirs:
            s = (float(smooth @ d) + _sampled_dirderiv(sel, Mu, M @ d, rng)
                 + phi.value(t, thk, uk + d) - phi_u)
            if s < worst:
                worst, worst_k = s, k
        r_th = ME @ (thk - TH[k - 1]) / dt + dvhi.opBbar(t, thk) - dvhi.rhsf(t, thk, Th @ uk)
        th_res = max(th_res, E.norm_dual(r_th))
    return InequalityReport(worst, worst_k, th_res, len(dirs) if grid.N else 0, grid.N)


# --------------------------------------------------------------------------
# bundled instance


def dvhi_benchmark(seed: int = 0, dim: int = 2, margin: float = 0.5, coupling: float = 0.3,
                   nonsmooth: bool = True) -> DvhiProblem:
    """Randomized DVHI with both gaps of the smallness condition equal to ``margin``.

    ``G`` is a sawtooth potential (nonconvex, nonsmooth), ``phi`` a
    temperature-dependent weighted l1 norm and ``f(t, theta, y)`` couples
    through ``y = vartheta u``.  ``nonsmooth=False`` sets ``G = phi = 0``.
    """
    rng = np.random.default_rng(seed)
    GH = random_spd(rng, dim, 0.5, 1.0)
    V = DiscreteSpace(GH + random_spd(rng, dim, 0.2, 1.0), GH, "V")
    EH = random_spd(rng, dim, 0.5, 1.0)
    E = DiscreteSpace(EH + random_spd(rng, dim, 0.2, 1.0), EH, "E")
    X0 = DiscreteSpace.euclidean(dim, "X0")
    Y0 = DiscreteSpace.euclidean(dim, "Y0")
    X = E.pivot()
    eu = DiscreteSpace.euclidean(dim)

    M = rng.standard_normal((dim, dim))
    M /= operator_norm(M, V, X0)
    Th = rng.standard_normal((dim, dim))
    Th *= coupling / operator_norm(Th, V.pivot(), Y0)

    beta, kappa = 0.5, 0.6
    m_G = kappa * beta if nonsmooth else 0.0
    a = m_G + margin
    GV, GE = V.gram_strong, E.gram_strong
    skew = rng.standard_normal((dim, dim))
    skew = 0.5 * (skew - skew.T)
    opAbar = MonotoneOperator(lambda t, v: a * (GV @ v) + skew @ v + 0.3 * np.tanh(v), m=a, c0=0.0,
                              c1=a + operator_norm(skew, V, V.dual()) + 0.3 * operator_norm(np.eye(dim), V, V.dual()))
    C_th = rng.standard_normal((dim, dim))
    C_th *= coupling / operator_norm(C_th, X, eu)
    if nonsmooth:
        potG = ConstraintPotential(lambda t, th, x: kappa * sawtooth(x + C_th @ th, beta), m_G=m_G,
                                   mbar_G=kappa * max(1.0, beta) * coupling, c0G=0.0, c1G=kappa * (1 + beta) * coupling,
                                   c2G=kappa * (1 + beta))
        c_phi = 0.2
        P = rng.standard_normal((dim, dim))
        P /= operator_norm(P, X, eu)
        wts = lambda th: c_phi * (1.0 + 0.5 * np.tanh(P @ th))
        inv = 1.0 / math.sqrt(float(np.linalg.eigvalsh(GV)[0]))
        potPhi = ConvexPotentialPhi(lambda t, th, rho, x: soft_threshold(x, rho * wts(th)), m_phi=0.5 * c_phi * inv,
                                    c0phi=1.5 * c_phi * math.sqrt(dim) * inv,
                                    value=lambda t, th, v: float(wts(th) @ np.abs(v)),
                                    subgrad=lambda t, th, v: wts(th) * np.sign(v))
    else:
        potG = ConstraintPotential(lambda t, th, x: np.zeros(dim), value=lambda t, th, x: 0.0)
        potPhi = zero_convex_potential()
    CF = rng.standard_normal((dim, dim))
    CF *= coupling / operator_norm(CF, X, V.dual())
    f0 = rng.standard_normal(dim)
    rhsF = LipschitzSource(lambda t, th: CF @ th + math.sin(2 * math.pi * t) * f0, L_F=coupling,
                           c0F=V.norm_dual(f0), c1F=coupling)

    ell = 0.2
    L_os = ell / float(np.linalg.eigvalsh(GE)[0])
    b = L_os + margin
    skb = rng.standard_normal((dim, dim))
    skb = 0.5 * (skb - skb.T)
    opBbar = MonotoneOperator(lambda t, th: b * (GE @ th) + skb @ th, m=b, c1=b + operator_norm(skb, E, E.dual()))
    Cy = rng.standard_normal((dim, dim))
    Cy /= operator_norm(Cy, Y0, E.dual())
    g0 = rng.standard_normal(dim)
    eu_to_Ed = operator_norm(np.eye(dim), eu, E.dual())
    rhsf = CoupledSource(lambda t, th, y: Cy @ y + ell * np.sin(th) + math.cos(math.pi * t) * g0, L_f=1.0, L_os=L_os,
                         c0f=E.norm_dual(g0), c1f=ell * eu_to_Ed * operator_norm(np.eye(dim), E, eu), c2f=1.0)
    return DvhiProblem(V, E, X0, Y0, opAbar, potG, M, Th, rhsF, opBbar, rhsf,
                       rng.standard_normal(dim), rng.standard_normal(dim), potPhi)
