"""Age-structured chemostat: simulation, Lyapunov diagnostics and stability certificates."""
from ._accel import backend, set_backend
from .certificate import (Certificate, ConditionReport, check_conditions, evaluate_certificate,
                          feasibility_threshold_scan, search_certificate, tothkot_recipe)
from .equilibrium import Equilibrium, moment, solve_equilibrium, survivor_profile
from .errors import ConfigError, DomainError
from .lyapunov import LyapunovMonitor, LyapunovWeights, decay_check, derivative_U, lyapunov_V, normalized_vars
from .model import (AssumptionBData, Constant, ExpDecay, Linear, ModelParams, Monod, Tabulated,
                    tothkot_assumption_b, tothkot_model, validate_model, verify_assumption_A,
                    verify_assumption_B)
from .simulator import State, Trajectory, initial_state, oracle_profile, simulate, step

__version__ = "0.1.0"

__all__ = [
    "backend", "set_backend", "Certificate", "ConditionReport", "check_conditions", "evaluate_certificate",
    "feasibility_threshold_scan", "search_certificate", "tothkot_recipe", "Equilibrium", "moment",
    "solve_equilibrium", "survivor_profile", "ConfigError", "DomainError", "LyapunovMonitor",
    "LyapunovWeights", "decay_check", "derivative_U", "lyapunov_V", "normalized_vars", "AssumptionBData",
    "Constant", "ExpDecay", "Linear", "ModelParams", "Monod", "Tabulated", "tothkot_assumption_b",
    "tothkot_model", "validate_model", "verify_assumption_A", "verify_assumption_B", "State", "Trajectory",
    "initial_state", "oracle_profile", "simulate", "step",
]
