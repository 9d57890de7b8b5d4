"""P1 finite element spaces on a tagged triangulation.

Velocities live in the vector space with Dirichlet nodes removed and
temperatures in the scalar space with Dirichlet and Neumann nodes removed.
The velocity norm is the strain energy norm ``|eps(v)|_{L2}`` and the
temperature norm is ``|grad theta|_{L2}``; their pivots are the consistent
L2 mass matrices.  Boundary integrals over the contact part use nodal
(trapezoid) quadrature, so boundary masses are diagonal.

Coefficient layout: free velocity node ``k`` owns dofs ``2k`` (x) and
``2k + 1`` (y).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..dvhi import power_iteration_norm
from ..spaces import DiscreteSpace, operator_norm
from .mesh import CONTACT, DIRICHLET, NEUMANN, Mesh2D

TRACE_TOL = 1e-10
TRACE_MAX_ITER = 10_000


def _element_geometry(mesh: Mesh2D):
    p = mesh.nodes[mesh.triangles]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    # gradients of the barycentric coordinates
    g1 = np.column_stack([d2[:, 1], -d2[:, 0]]) / det[:, None]
    g2 = np.column_stack([-d1[:, 1], d1[:, 0]]) / det[:, None]
    grads = np.stack([-g1 - g2, g1, g2], axis=1)
    return 0.5 * det, grads


@dataclass(frozen=True, eq=False)
class FemSpaces:
    mesh: Mesh2D

    # ---------------------------------------------------------------- geometry

    @cached_property
    def _geometry(self):
        return _element_geometry(self.mesh)

    @property
    def areas(self) -> np.ndarray:
        return self._geometry[0]

    @property
    def grads(self) -> np.ndarray:
        """``grads[e, a]`` is the gradient of the hat function of local vertex ``a``."""
        return self._geometry[1]

    @cached_property
    def v_nodes(self) -> np.ndarray:
        """Nodes carrying velocity dofs (not on the closure of the Dirichlet part)."""
        return np.setdiff1d(np.arange(self.mesh.n_nodes), self.mesh.nodes_of(DIRICHLET))

    @cached_property
    def e_nodes(self) -> np.ndarray:
        fixed = np.union1d(self.mesh.nodes_of(DIRICHLET), self.mesh.nodes_of(NEUMANN))
        return np.setdiff1d(np.arange(self.mesh.n_nodes), fixed)

    @property
    def nV(self) -> int:
        return 2 * len(self.v_nodes)

    @property
    def nE(self) -> int:
        return len(self.e_nodes)

    @cached_property
    def contact_nodes(self) -> np.ndarray:
        return self.mesh.nodes_of(CONTACT)

    @property
    def nC(self) -> int:
        return len(self.contact_nodes)

    def _boundary_data(self, tag):
        nodes = self.mesh.nodes_of(tag)
        pos = {int(a): i for i, a in enumerate(nodes)}
        w = np.zeros(len(nodes))
        nrm = np.zeros((len(nodes), 2))
        for a, b in self.mesh.edges_of(tag):
            d = self.mesh.nodes[b] - self.mesh.nodes[a]
            length = float(np.hypot(*d))
            out = np.array([d[1], -d[0]]) / length
            for c in (a, b):
                w[pos[int(c)]] += 0.5 * length
                nrm[pos[int(c)]] += 0.5 * length * out
        return nodes, w, nrm / np.linalg.norm(nrm, axis=1, keepdims=True)

    @cached_property
    def contact_weights(self) -> np.ndarray:
        return self._boundary_data(CONTACT)[1]

    @cached_property
    def normals(self) -> np.ndarray:
        """Outward unit normals at the contact nodes (edge-length weighted average)."""
        return self._boundary_data(CONTACT)[2]

    @cached_property
    def tangents(self) -> np.ndarray:
        n = self.normals
        return np.column_stack([-n[:, 1], n[:, 0]])

    @cached_property
    def contact_neighbours(self) -> list:
        """Neighbours of each contact node along contact edges (contact-local indices)."""
        pos = {int(a): i for i, a in enumerate(self.contact_nodes)}
        nb = [[] for _ in range(self.nC)]
        for a, b in self.mesh.edges_of(CONTACT):
            nb[pos[int(a)]].append(pos[int(b)])
            nb[pos[int(b)]].append(pos[int(a)])
        return nb

    # ------------------------------------------------------- dof bookkeeping

    @cached_property
    def _vpos(self) -> np.ndarray:
        pos = -np.ones(self.mesh.n_nodes, dtype=int)
        pos[self.v_nodes] = np.arange(len(self.v_nodes))
        return pos

    @cached_property
    def _epos(self) -> np.ndarray:
        pos = -np.ones(self.mesh.n_nodes, dtype=int)
        pos[self.e_nodes] = np.arange(self.nE)
        return pos

    def velocity_field(self, v) -> np.ndarray:
        """Nodal values ``(n_nodes, 2)`` of a velocity coefficient vector (or a stack of them)."""
        v = np.asarray(v, dtype=float)
        out = np.zeros(v.shape[:-1] + (self.mesh.n_nodes, 2))
        out[..., self.v_nodes, :] = v.reshape(v.shape[:-1] + (-1, 2))
        return out

    def temperature_field(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        out = np.zeros(theta.shape[:-1] + (self.mesh.n_nodes,))
        out[..., self.e_nodes] = theta
        return out

    def restrict_velocity(self, nodal) -> np.ndarray:
        return np.asarray(nodal, dtype=float)[..., self.v_nodes, :].reshape(np.shape(nodal)[:-2] + (-1,))

    def restrict_temperature(self, nodal) -> np.ndarray:
        return np.asarray(nodal, dtype=float)[..., self.e_nodes]

    # ------------------------------------------------- pointwise operations

    def strain(self, v) -> np.ndarray:
        """Elementwise strain ``(..., n_tri, 2, 2)``."""
        v = np.asarray(v, dtype=float)
        r = (v @ self._strain_flat.T).reshape(v.shape[:-1] + (-1, 3))
        xy = r[..., 2] * math.sqrt(0.5)
        return np.stack([np.stack([r[..., 0], xy], -1), np.stack([xy, r[..., 1]], -1)], -2)

    def div_back(self, stress) -> np.ndarray:
        """Coefficients of ``zeta -> sum_e |e| stress_e : eps(zeta)_e``."""
        s = np.asarray(stress)
        voigt = np.stack([s[:, 0, 0], s[:, 1, 1], math.sqrt(0.5) * (s[:, 0, 1] + s[:, 1, 0])], -1)
        return (self.areas[:, None] * voigt).ravel() @ self._strain_flat

    def grad(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return (theta @ self._grad_flat.T).reshape(theta.shape[:-1] + (-1, 2))

    def grad_back(self, flux) -> np.ndarray:
        return (self.areas[:, None] * flux).ravel() @ self._grad_flat

    def element_mean_temperature(self, theta) -> np.ndarray:
        return self.temperature_field(theta)[..., self.mesh.triangles].mean(axis=-1)

    def element_mean_velocity(self, v) -> np.ndarray:
        return self.velocity_field(v)[..., self.mesh.triangles, :].mean(axis=-2)

    def element_source_back(self, density) -> np.ndarray:
        """Coefficients of ``zeta -> sum_e |e| density_e mean_e(zeta)``."""
        nodal = np.repeat((self.areas * density / 3.0)[:, None], 3, axis=1)
        return self.restrict_temperature(np.bincount(self.mesh.triangles.ravel(), nodal.ravel(), self.mesh.n_nodes))

    # ----------------------------------------------------------- matrices

    @cached_property
    def strain_matrix(self) -> np.ndarray:
        """``(n_tri, 3, nV)``: rows give ``(eps_xx, eps_yy, sqrt(2) eps_xy)``."""
        ne = self.mesh.n_triangles
        B = np.zeros((ne, 3, self.nV))
        s2 = np.sqrt(0.5)
        for a in range(3):
            k = self._vpos[self.mesh.triangles[:, a]]
            live = k >= 0
            e = np.nonzero(live)[0]
            gx, gy = self.grads[e, a, 0], self.grads[e, a, 1]
            B[e, 0, 2 * k[live]] += gx
            B[e, 2, 2 * k[live]] += s2 * gy
            B[e, 1, 2 * k[live] + 1] += gy
            B[e, 2, 2 * k[live] + 1] += s2 * gx
        return B

    @cached_property
    def _strain_flat(self) -> np.ndarray:
        return self.strain_matrix.reshape(-1, self.nV)

    @cached_property
    def _grad_flat(self) -> np.ndarray:
        return self.gradient_matrix.reshape(-1, self.nE)

    @cached_property
    def gradient_matrix(self) -> np.ndarray:
        ne = self.mesh.n_triangles
        D = np.zeros((ne, 2, self.nE))
        for a in range(3):
            k = self._epos[self.mesh.triangles[:, a]]
            e = np.nonzero(k >= 0)[0]
            D[e, :, k[k >= 0]] += self.grads[e, a, :]
        return D

    @cached_property
    def scalar_mass_full(self) -> np.ndarray:
        n = self.mesh.n_nodes
        M = np.zeros((n, n))
        local = (np.ones((3, 3)) + np.eye(3)) / 12.0
        for e, tri in enumerate(self.mesh.triangles):
            M[np.ix_(tri, tri)] += self.areas[e] * local
        return M

    @cached_property
    def vector_mass_full(self) -> np.ndarray:
        return np.kron(self.scalar_mass_full, np.eye(2))

    @cached_property
    def _vdofs(self) -> np.ndarray:
        return np.column_stack([2 * self.v_nodes, 2 * self.v_nodes + 1]).ravel()

    @cached_property
    def V(self) -> DiscreteSpace:
        B = self.strain_matrix
        K = np.einsum("e,eri,erj->ij", self.areas, B, B)
        M = self.vector_mass_full[np.ix_(self._vdofs, self._vdofs)]
        return DiscreteSpace(K, M, "V")

    @cached_property
    def E(self) -> DiscreteSpace:
        D = self.gradient_matrix
        K = np.einsum("e,eri,erj->ij", self.areas, D, D)
        M = self.scalar_mass_full[np.ix_(self.e_nodes, self.e_nodes)]
        return DiscreteSpace(K, M, "E")

    def boundary_space(self, label: str) -> DiscreteSpace:
        """``L2`` on the contact part with nodal quadrature (one value per contact node)."""
        W = np.diag(self.contact_weights)
        return DiscreteSpace(W, W, label)

    def velocity_load_matrix(self) -> np.ndarray:
        """Maps nodal values ``(n_nodes*2,)`` of a body force to load coefficients."""
        return self.vector_mass_full[self._vdofs, :]

    def temperature_load_matrix(self) -> np.ndarray:
        return self.scalar_mass_full[self.e_nodes, :]

    # ------------------------------------------------------ trace maps

    @cached_property
    def trace_matrix(self) -> np.ndarray:
        """``(2 nC, nV)``: velocity at contact nodes, node-major."""
        G = np.zeros((2 * self.nC, self.nV))
        for i, a in enumerate(self.contact_nodes):
            k = self._vpos[a]
            if k >= 0:
                G[2 * i, 2 * k] = G[2 * i + 1, 2 * k + 1] = 1.0
        return G

    def _project(self, dirs) -> np.ndarray:
        P = np.zeros((self.nC, self.nV))
        for i, a in enumerate(self.contact_nodes):
            k = self._vpos[a]
            if k >= 0:
                P[i, 2 * k:2 * k + 2] = dirs[i]
        return P

    @cached_property
    def normal_trace(self) -> np.ndarray:
        """``(nC, nV)``: ``v -> v . nu`` at the contact nodes."""
        return self._project(self.normals)

    @cached_property
    def tangential_trace(self) -> np.ndarray:
        return self._project(self.tangents)

    @cached_property
    def temperature_trace(self) -> np.ndarray:
        P = np.zeros((self.nC, self.nE))
        for i, a in enumerate(self.contact_nodes):
            if self._epos[a] >= 0:
                P[i, self._epos[a]] = 1.0
        return P

    def regularizer(self, centre: float = 0.5) -> np.ndarray:
        """Nodal smoothing along the contact part: ``centre`` on the node, the rest shared by its neighbours.

        At an end of the contact part the missing neighbour's share stays on
        the node itself.
        """
        R = np.zeros((self.nC, self.nC))
        for i, nb in enumerate(self.contact_neighbours):
            side = 0.5 * (1.0 - centre)
            R[i, i] = centre + side * (2 - len(nb))
            for j in nb:
                R[i, j] += side
        return R

    # ----------------------------------------------------------- constants

    @cached_property
    def trace_norm(self) -> float:
        """``|gamma|``: velocity trace on the contact part, strain norm to nodal-quadrature L2."""
        W2 = np.diag(np.repeat(self.contact_weights, 2))
        return power_iteration_norm(self.trace_matrix, self.V, DiscreteSpace(W2, W2), tol=TRACE_TOL,
                                    max_iter=TRACE_MAX_ITER, strict=True)

    @cached_property
    def trace_norm_E(self) -> float:
        """Temperature trace on the contact part, gradient norm to nodal-quadrature L2."""
        return power_iteration_norm(self.temperature_trace, self.E, self.boundary_space("Y"), tol=TRACE_TOL,
                                    max_iter=TRACE_MAX_ITER, strict=True)

    @cached_property
    def poincare_V(self) -> float:
        return operator_norm(np.eye(self.nV), self.V, self.V.pivot())

    @cached_property
    def poincare_E(self) -> float:
        return operator_norm(np.eye(self.nE), self.E, self.E.pivot())

    def regularizer_norm(self, R: np.ndarray) -> float:
        """Norm of ``theta -> R (theta on the contact part)`` from the temperature pivot to boundary L2."""
        return operator_norm(R @ self.temperature_trace, self.E.pivot(), self.boundary_space("Y"))

    @property
    def area(self) -> float:
        return float(self.areas.sum())

    @property
    def contact_length(self) -> float:
        return float(self.contact_weights.sum())


def trace_norm(fem: FemSpaces) -> float:
    return fem.trace_norm
