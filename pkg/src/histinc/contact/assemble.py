"""Assembly of the velocity/temperature system for the contact model.

Unknowns: velocity ``w`` (free velocity dofs) and temperature ``theta``
(free temperature dofs).  The displacement enters through the history
operators

* ``S w = normal trace of (u0 + int w)``,
* ``R w = int_0^t |tangential trace of (u0 + int_0^s w)| ds`` (accumulated slip),
* ``R1 w = div of (elast(eps(u0) + int eps(w)) + int relax(t-s) eps(w(s)) ds)``,

all with left-rectangle quadrature, so node ``k`` depends on ``w_0..w_{k-1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from ..dvhi import linear_matrix
from ..errors import ConfigurationError
from ..operators import (
    AccumulateThenMap, ClarkePotentialG, ClarkePotentialJ, ConvexPotentialPhi, HistoryOperator, OperatorFamilyA,
    OperatorFamilyB, ZeroHistory, soft_threshold,
)
from ..spaces import DiscreteSpace, TimeGrid
from ..system import SystemProblem
from .fem import FemSpaces
from .laws import ContactLaw, MaterialLaw
from .mesh import DIRICHLET, NEUMANN, Mesh2D


def _left_sums(values, dt):
    out = np.zeros_like(values)
    acc = np.zeros(values.shape[1:])
    for k in range(1, len(values)):
        acc = acc + dt * values[k - 1]
        out[k] = acc
    return out


@dataclass(frozen=True, eq=False)
class StrainMemory(HistoryOperator):
    """Elastic response to the accumulated strain plus the relaxation convolution."""

    fem: FemSpaces = None
    material: MaterialLaw = None
    u0: np.ndarray = None
    _tables: dict = field(default_factory=dict, repr=False)

    def _kernel(self, grid: TimeGrid) -> np.ndarray:
        key = (grid.T, grid.N)
        if key not in self._tables:
            self._tables[key] = np.array([self.material.relax(lag) for lag in grid.nodes])
        return self._tables[key]

    def _strains(self, values):
        # row by row, so that prefix and full evaluations round identically
        return [self.fem.strain(v) for v in values]

    def _conv(self, C, eps, k, dt):
        conv = np.zeros(eps[0].shape) if k else 0.0
        for j in range(k):
            conv = conv + dt * np.einsum("ijkl,ekl->eij", C[k - j], eps[j])
        return conv

    def stresses(self, values: np.ndarray, grid: TimeGrid) -> np.ndarray:
        """Memory stress ``(N + 1, n_tri, 2, 2)`` at every node."""
        eps = self._strains(values)
        C, dt = self._kernel(grid), grid.dt
        out = np.zeros((grid.N + 1, self.fem.mesh.n_triangles, 2, 2))
        acc = self.fem.strain(self.u0)
        for k in range(grid.N + 1):
            if k > 0:
                acc = acc + dt * eps[k - 1]
            out[k] = self.material.elast(grid.nodes[k], acc) + self._conv(C, eps, k, dt)
        return out

    def stress_at(self, prefix: np.ndarray, grid: TimeGrid, k: int) -> np.ndarray:
        acc = self.fem.strain(self.u0)
        if k == 0:
            return self.material.elast(grid.nodes[0], acc)
        eps = self._strains(prefix)
        for j in range(k):
            acc = acc + grid.dt * eps[j]
        return self.material.elast(grid.nodes[k], acc) + self._conv(self._kernel(grid), eps, k, grid.dt)

    def _eval_prefix(self, prefix, grid, k):
        return self.fem.div_back(self.stress_at(prefix, grid, k))

    def _eval_all(self, values, grid):
        return np.array([self.fem.div_back(s) for s in self.stresses(values, grid)])


@dataclass(frozen=True, eq=False)
class AccumulatedSlip(HistoryOperator):
    """Nodewise ``int_0^t |U_tau(s)| ds`` with ``U = u0 + int w``."""

    tangential: np.ndarray = None
    u0: np.ndarray = None

    def _slip(self, values, dt, n):
        v = np.zeros((n, len(self.u0)))
        m = min(len(values), n)
        v[:m] = values[:m]
        U = self.u0 + _left_sums(v, dt)
        return _left_sums(np.abs(U @ self.tangential.T), dt)

    def _eval_prefix(self, prefix, grid, k):
        return self._slip(prefix, grid.dt, k + 1)[k]

    def _eval_all(self, values, grid):
        return self._slip(values[:-1], grid.dt, grid.N + 1)


@dataclass(frozen=True, eq=False)
class ContactProblem(SystemProblem):
    """System problem plus the finite element data it was assembled from."""

    fem: FemSpaces = None
    material: MaterialLaw = None
    contact: ContactLaw = None
    reg_matrix: np.ndarray = None
    u0: np.ndarray = None
    constants: dict = field(default_factory=dict)

    @property
    def ledger(self) -> dict:
        led = super().ledger
        led.update(self.constants)
        return led

    @cached_property
    def contact_ledger(self) -> dict:
        keys = ("m_visc", "beta_bar", "k2", "trace_norm", "trace_norm_E", "m_cond", "m0")
        return {"kind": "contact", **{k: self.constants[k] for k in keys}}


def relaxation_constants(beta_bar: float, k2: float, m0: float, trace: float, trace_E: float | None = None) -> dict:
    """``m_J = beta_bar k2 |gamma|^2`` and ``m_g = m0 |gamma|^2`` (temperature trace if given)."""
    trace_E = trace if trace_E is None else trace_E
    return {"m_J": beta_bar * k2 * trace ** 2, "m_g": m0 * trace_E ** 2}


def _nodal(value, mesh: Mesh2D, shape, name):
    """Nodal array from ``None`` (zero), an array, or a function of the node coordinates."""
    if value is None:
        return np.zeros((mesh.n_nodes,) + shape)
    out = value(mesh.nodes) if callable(value) else value
    out = np.asarray(out, dtype=float)
    if out.shape != (mesh.n_nodes,) + shape:
        raise ConfigurationError(f"expected nodal shape {(mesh.n_nodes,) + shape}, got {out.shape}", name)
    return out


def _time_nodal(fn, mesh, shape, name) -> Callable | None:
    if fn is None:
        return None
    if not callable(fn):
        const = _nodal(fn, mesh, shape, name)
        return lambda t: const
    return lambda t: _nodal(fn(t, mesh.nodes), mesh, shape, name)


def _require_zero_on(values, nodes, name, where):
    # round-off from evaluating a formula on the boundary is tolerated
    if len(nodes) and np.abs(values[nodes]).max() > 1e-12 * max(1.0, float(np.abs(values).max())):
        raise ConfigurationError(f"must vanish on {where}", name)


def assemble_problem(mesh: Mesh2D, material: MaterialLaw, contact: ContactLaw, loads: dict | None = None,
                     initial: dict | None = None, T: float = 1.0, fem: FemSpaces | None = None) -> ContactProblem:
    """Velocity/temperature system for the thermo-viscoelastic contact model.

    ``loads`` may hold ``f0(t, x)`` (body force), ``fN(t, x)`` (traction on
    the Neumann part) and ``h0(t, x)`` (heat source); ``initial`` may hold
    ``u0``, ``w0``, ``theta0`` as nodal arrays or functions of ``x``.
    ``T`` is the horizon used in the slip history constant.
    """
    loads = dict(loads or {})
    initial = dict(initial or {})
    unknown = (set(loads) - {"f0", "fN", "h0"}) | (set(initial) - {"u0", "w0", "theta0"})
    if unknown:
        raise ConfigurationError(f"unknown data entries {sorted(unknown)}", "data")
    fem = fem or FemSpaces(mesh)
    V, E = fem.V, fem.E
    Y, Z = fem.boundary_space("Y"), fem.boundary_space("Z")
    Q = DiscreteSpace.euclidean(1, "Q")
    wC = fem.contact_weights
    Tn, Tt, Tth = fem.normal_trace, fem.tangential_trace, fem.temperature_trace
    Rc = linear_matrix(fem.regularizer(contact.reg_centre), fem.nC, fem.nC, "contact.reg")
    Rth = Rc @ Tth

    gamma, gamma_E = fem.trace_norm, fem.trace_norm_E
    reg_norm = fem.regularizer_norm(Rc)
    pV, pE = fem.poincare_V, fem.poincare_E
    root_area, root_len = math.sqrt(fem.area), math.sqrt(fem.contact_length)

    # ---- initial data
    dnodes = mesh.nodes_of(DIRICHLET)
    u0n = _nodal(initial.get("u0"), mesh, (2,), "initial.u0")
    w0n = _nodal(initial.get("w0"), mesh, (2,), "initial.w0")
    th0n = _nodal(initial.get("theta0"), mesh, (), "initial.theta0")
    _require_zero_on(u0n, dnodes, "initial.u0", "the Dirichlet part")
    _require_zero_on(w0n, dnodes, "initial.w0", "the Dirichlet part")
    _require_zero_on(th0n, np.union1d(dnodes, mesh.nodes_of(NEUMANN)), "initial.theta0",
                     "the Dirichlet and Neumann parts")
    u0, w0, th0 = fem.restrict_velocity(u0n), fem.restrict_velocity(w0n), fem.restrict_temperature(th0n)

    # ---- A: viscosity and thermal stress
    mat = material

    def fa(t, th, v):
        th_el = fem.element_mean_temperature(th)
        return fem.div_back(mat.visc(t, th_el, fem.strain(v)) + mat.thermal(t, th_el))

    opA = OperatorFamilyA(fa, m_A=mat.m_visc, mbar_A=mat.L_visc + mat.L_thermal,
                          a0=(mat.a0 + mat.c0e) * root_area, a1=mat.a1 + mat.c1e, a2=mat.a2)

    # ---- J: damper weighted normal potential
    law = contact

    def fj(t, th, z, v):
        k = law.damper(t, Rth @ th, z)
        return Tn.T @ (wC * k * law.jnu_sel(Tn @ v))

    def jval(t, th, z, v):
        k = law.damper(t, Rth @ th, z)
        return float(np.sum(wC * k * law.jnu_value(Tn @ v)))

    relax = relaxation_constants(law.beta_bar, law.k2, law.m0, gamma, gamma_E)
    potJ = ClarkePotentialJ(fj, m_J=relax["m_J"], mbar_J=law.L_k * law.c0_bar * gamma * max(reg_norm, 1.0),
                            c0J=law.k2 * law.c0_bar * gamma * root_len,
                            value=None if law.jnu_value is None else jval)

    # ---- phi: friction bound times tangential speed
    def weights(t, th, y):
        return wC * law.friction(t, Rth @ th, y)

    def prox(t, th, y, rho, x):
        s = Tt @ x
        return x + Tt.T @ (soft_threshold(s, rho * weights(t, th, y)) - s)

    potPhi = ConvexPotentialPhi(prox, m_phi=law.L_Fb * gamma * max(reg_norm, 1.0),
                                c0phi=law.Fb_max * gamma * root_len,
                                value=lambda t, th, y, v: float(np.sum(weights(t, th, y) * np.abs(Tt @ v))),
                                subgrad=lambda t, th, y, v: Tt.T @ (weights(t, th, y) * np.sign(Tt @ v)))

    # ---- B: conduction minus viscous heating and frictional heating
    def fb(t, w, wbar, th):
        flux = mat.conduct(t, fem.grad(th))
        heat = mat.source(t, fem.element_mean_velocity(w))
        fric = law.h_tau(np.abs(Tt @ w))
        return fem.grad_back(flux) - fem.element_source_back(heat) - Tth.T @ (wC * fric)

    h_tau0 = float(np.abs(law.h_tau(np.zeros(1)))[0])
    opB = OperatorFamilyB(fb, m_B=mat.m_cond, mbar_B=mat.L_source * pV * pE + law.L_tau * gamma * gamma_E,
                          b0=mat.k0 * root_area + mat.n0 * root_area * pE + h_tau0 * gamma_E * root_len,
                          b1=mat.L_source * pV * pE + law.L_tau * gamma * gamma_E, b3=mat.k1)

    # ---- g: heat exchange potential
    potG = ClarkePotentialG(lambda t, w, th: Tth.T @ (wC * law.heat_sel(t, Tth @ th)),
                            m_g=relax["m_g"], c0g=law.c0 * gamma_E * root_len, c2g=law.c1 * gamma_E ** 2)

    # ---- histories
    histS = AccumulateThenMap(Z, gamma, post=lambda x: Tn @ x, offset=u0)
    histR = AccumulatedSlip(Y, T * gamma, tangential=Tt, u0=u0)
    histR1 = StrainMemory(V.dual(), mat.L_elast + mat.relax_bound, fem=fem, material=mat, u0=u0)
    histR2 = ZeroHistory(Q)

    # ---- loads
    f0 = _time_nodal(loads.get("f0"), mesh, (2,), "loads.f0")
    fN = _time_nodal(loads.get("fN"), mesh, (2,), "loads.fN")
    h0 = _time_nodal(loads.get("h0"), mesh, (), "loads.h0")
    Mv, Me = fem.velocity_load_matrix(), fem.temperature_load_matrix()
    nodesN, wN = _neumann_weights(mesh)
    lumpN = np.zeros(mesh.n_nodes)
    lumpN[nodesN] = wN

    def load1(t):
        out = np.zeros(V.dim)
        if f0 is not None:
            out += Mv @ f0(t).ravel()
        if fN is not None:
            out += fem.restrict_velocity(lumpN[:, None] * fN(t))
        return out

    load2 = None if h0 is None else (lambda t: Me @ h0(t))

    constants = {"m_visc": mat.m_visc, "beta_bar": law.beta_bar, "k2": law.k2, "trace_norm": gamma,
                 "trace_norm_E": gamma_E, "m_cond": mat.m_cond, "m0": law.m0, "reg_norm": reg_norm,
                 "poincare_V": pV, "poincare_E": pE}
    return ContactProblem(V, E, Y, Z, Q, opA, potJ, potPhi, opB, potG, histR, histR1, histR2, histS, w0, th0,
                          load1 if (f0 is not None or fN is not None) else None, load2,
                          fem=fem, material=mat, contact=law, reg_matrix=Rth, u0=u0, constants=constants)


def _neumann_weights(mesh: Mesh2D):
    nodes = mesh.nodes_of(NEUMANN)
    pos = {int(a): i for i, a in enumerate(nodes)}
    w = np.zeros(len(nodes))
    for a, b in mesh.edges_of(NEUMANN):
        h = float(np.linalg.norm(mesh.nodes[b] - mesh.nodes[a]))
        w[pos[int(a)]] += 0.5 * h
        w[pos[int(b)]] += 0.5 * h
    return nodes, w
