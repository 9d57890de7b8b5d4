"""Solvers for coupled first-order evolution inclusions with history terms.

The core pieces are coefficient spaces (:mod:`histinc.spaces`), operator
families and potentials (:mod:`histinc.operators`), the implicit Euler
inclusion stepper (:mod:`histinc.stepper`), the Picard fixed point on frozen
data (:mod:`histinc.system`), the inequality reduction (:mod:`histinc.dvhi`)
and a 2D thermo-viscoelastic contact model (:mod:`histinc.contact`).
"""

from .errors import ConfigurationError, GateError, HistincError, MaxIterations, NonConvergence, ProbeError
from .operators import (
    AccumulateThenMap, ClarkePotentialG, ClarkePotentialJ, ConvexPotentialPhi, CustomHistory, HistoryOperator,
    IntegralOfMap, OperatorFamilyA, OperatorFamilyB, VolterraKernel, ZeroHistory, soft_threshold, zero_potential_G,
    zero_potential_J, zero_potential_phi,
)
from .probes import GateReport, ProbeReport, ProbeSampler, check_smallness
from .spaces import DiscreteSpace, TimeGrid, Trajectory, bochner_norm, operator_norm
from .stepper import SingleInclusionProblem, StepSolveConfig, solve_inclusion, step_solve
from .system import (
    FrozenData, SolveDiagnostics, SystemConfig, SystemProblem, apply_F, solve_monolithic_oracle, solve_system,
    verify_dependence_estimate, verify_theta_estimate,
)
from .dvhi import DvhiProblem, build_system, check_inequality_residual, solve_dvhi

__version__ = "0.1.0"

__all__ = [
    "AccumulateThenMap", "ClarkePotentialG", "ClarkePotentialJ", "ConfigurationError", "ConvexPotentialPhi",
    "CustomHistory", "DiscreteSpace", "DvhiProblem", "FrozenData", "GateError", "GateReport", "HistincError",
    "HistoryOperator", "IntegralOfMap", "MaxIterations", "NonConvergence", "OperatorFamilyA", "OperatorFamilyB",
    "ProbeError", "ProbeReport", "ProbeSampler", "SingleInclusionProblem", "SolveDiagnostics", "StepSolveConfig",
    "SystemConfig", "SystemProblem", "TimeGrid", "Trajectory", "VolterraKernel", "ZeroHistory", "apply_F",
    "bochner_norm", "build_system", "check_inequality_residual", "check_smallness", "operator_norm",
    "soft_threshold", "solve_dvhi", "solve_inclusion", "solve_monolithic_oracle", "solve_system", "step_solve",
    "verify_dependence_estimate", "verify_theta_estimate", "zero_potential_G", "zero_potential_J",
    "zero_potential_phi",
]
