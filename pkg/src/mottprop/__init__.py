"""Exact propagation of driven Hubbard chains with adaptive commutator-free Magnus integrators."""

from .cfm import (CFMScheme, SchemeError, builtin_scheme, cfm_step, defect_estimate,
                  load_scheme_table, resolve_scheme)
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .hubbard import (FockBasis, HubbardParams, SparseOperator, assemble_potential,
                      assemble_static, enumerate_basis)
from .krylov import KrylovBreakdown, KrylovConfig, expmv, ground_state
from .pulse import DriveProfile, Generator
from .stepper import (ControllerConfig, PropagationError, PropagationTrace, propagate_adaptive,
                      propagate_dopri45_adaptive, propagate_fixed)

__version__ = "0.1.0"

__all__ = [
    "CFMScheme", "SchemeError", "builtin_scheme", "cfm_step", "defect_estimate", "load_scheme_table",
    "resolve_scheme", "ConfigError", "ExperimentConfig", "load_config", "parse_config", "FockBasis",
    "HubbardParams", "SparseOperator", "assemble_potential", "assemble_static", "enumerate_basis",
    "KrylovBreakdown", "KrylovConfig", "expmv", "ground_state", "DriveProfile", "Generator",
    "ControllerConfig", "PropagationError", "PropagationTrace", "propagate_adaptive",
    "propagate_dopri45_adaptive", "propagate_fixed",
]
