"""Solve the contact model and recover displacement and stress."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import GateError
from ..probes import GateReport, check_contact_smallness
from ..spaces import TimeGrid, Trajectory
from ..system import SolveDiagnostics, SystemConfig, solve_system
from .assemble import ContactProblem, assemble_problem
from .laws import ContactLaw, MaterialLaw
from .mesh import Mesh2D


@dataclass
class ContactSolution:
    u: Trajectory
    w: Trajectory
    theta: Trajectory
    sigma: np.ndarray  # (N + 1, n_tri, 2, 2)
    diag: SolveDiagnostics
    problem: ContactProblem
    gate: GateReport


def gate_contact(problem: ContactProblem) -> GateReport:
    rep = check_contact_smallness(problem.contact_ledger)
    if not rep.passed:
        raise GateError(f"contact smallness violated: {rep.condition}; margins {rep.margins}", rep.margins)
    return rep


def recover_displacement(problem: ContactProblem, w: Trajectory) -> Trajectory:
    """``u_k = u0 + dt * sum_{j<k} w_j``."""
    vals = np.empty_like(w.values)
    acc = problem.u0.copy()
    vals[0] = acc
    for k in range(1, w.grid.N + 1):
        acc = acc + w.grid.dt * w.values[k - 1]
        vals[k] = acc
    return Trajectory(problem.V, w.grid, vals)


def recover_stress(problem: ContactProblem, w: Trajectory, theta: Trajectory) -> np.ndarray:
    """Elementwise stress at every node from the constitutive law."""
    fem, mat, grid = problem.fem, problem.material, w.grid
    memory = problem.histR1.stresses(w.values, grid)
    th_el = fem.element_mean_temperature(theta.values)
    eps = fem.strain(w.values)
    return np.array([mat.visc(t, th_el[k], eps[k]) + memory[k] + mat.thermal(t, th_el[k])
                     for k, t in enumerate(grid.nodes)])


def interpenetration(problem: ContactProblem, u: Trajectory) -> dict:
    """Normal displacement on the contact part (reported only; the response is damped, not unilateral)."""
    un = u.values @ problem.fem.normal_trace.T
    return {"max_normal_displacement": float(un.max(initial=0.0)),
            "penetrating_node_steps": int(np.count_nonzero(un > 0))}


def solve_contact(mesh: Mesh2D, material: MaterialLaw, contact: ContactLaw, loads: dict | None = None,
                  initial: dict | None = None, grid: TimeGrid | None = None, cfg: SystemConfig | None = None,
                  freeze_theta: bool = False) -> ContactSolution:
    grid = grid or TimeGrid(1.0, 64)
    problem = assemble_problem(mesh, material, contact, loads, initial, T=grid.T)
    if freeze_theta:
        problem = replace(problem, freeze_theta=True)
    return solve_assembled(problem, grid, cfg)


def solve_assembled(problem: ContactProblem, grid: TimeGrid, cfg: SystemConfig | None = None) -> ContactSolution:
    rep = gate_contact(problem)
    w, theta, diag = solve_system(problem, grid, cfg)
    u = recover_displacement(problem, w)
    sigma = recover_stress(problem, w, theta)
    diag.extra["contact_margins"] = [float(m) for m in rep.margins]
    diag.extra["interpenetration"] = interpenetration(problem, u)
    return ContactSolution(u, w, theta, sigma, diag, problem, rep)
