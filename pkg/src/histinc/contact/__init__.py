"""Thermo-viscoelastic frictional contact on a rectangle (P1 elements, d = 2)."""

from .assemble import AccumulatedSlip, ContactProblem, StrainMemory, assemble_problem, relaxation_constants
from .benchmark import symmetric_benchmark
from .fem import FemSpaces, trace_norm
from .laws import ContactLaw, MaterialLaw, default_contact, default_material, isotropic_tensor
from .mesh import CONTACT, DIRICHLET, NEUMANN, Mesh2D
from .solve import ContactSolution, gate_contact, solve_assembled, solve_contact
from .vtk import write_vtk

__all__ = [
    "AccumulatedSlip", "ContactLaw", "ContactProblem", "ContactSolution", "CONTACT", "DIRICHLET", "FemSpaces",
    "MaterialLaw", "Mesh2D", "NEUMANN", "StrainMemory", "assemble_problem", "default_contact", "default_material",
    "gate_contact", "isotropic_tensor", "relaxation_constants", "solve_assembled", "solve_contact",
    "symmetric_benchmark", "trace_norm", "write_vtk",
]
