"""Numerical laboratory for quadratic growth, (strong) metric subregularity of
subdifferentials and the optimality conditions built on them, for piecewise
functions of one to three variables."""

__version__ = "0.1.0"

from .dsl import dump, dumps, load, loads
from .errors import (ArgumentError, BudgetExceeded, DomainError, ParseError,
                     PreconditionError, SubregLabError, UnsupportedStructure)
from .expr import parse_expr, parse_relation
from .piecewise import PiecewiseFn, Piece, GuardAtom
from .subdiff import (ProbeParams, SubdiffOracle, SubdiffSet, analytic_subdiff_1d,
                      chain_rule_check, horizon_subdiff, min_norm_subgradient,
                      numeric_subdiff, subdiff_continuity_probe, subdifferential)
from .moduli import (SampledMapping, check_equivalence, check_growth_to_solution_set,
                     estimate_alpha, estimate_kappa_strong, estimate_kappa_subreg,
                     local_min_check, perturbation_check, radial_profile, solution_set)
from .gauge import (gauge_of_set, minorant_bound_check, parabolic_minorant_check,
                    parametric_gauge)
from .certify import (c2_conditions, check_pair, necessary_conditions,
                      sufficient_condition)
from .report import Certificate, ConditionRecord

__all__ = [
    "ArgumentError", "BudgetExceeded", "Certificate", "ConditionRecord", "DomainError",
    "GuardAtom", "ParseError", "Piece", "PiecewiseFn", "PreconditionError", "ProbeParams",
    "SampledMapping", "SubdiffOracle", "SubdiffSet", "SubregLabError",
    "UnsupportedStructure", "analytic_subdiff_1d", "c2_conditions", "chain_rule_check",
    "check_equivalence", "check_growth_to_solution_set", "check_pair", "dump", "dumps",
    "estimate_alpha", "estimate_kappa_strong", "estimate_kappa_subreg", "gauge_of_set",
    "horizon_subdiff", "load", "loads", "local_min_check", "min_norm_subgradient",
    "minorant_bound_check", "necessary_conditions", "numeric_subdiff",
    "parabolic_minorant_check", "parametric_gauge", "parse_expr", "parse_relation",
    "perturbation_check", "radial_profile", "solution_set", "subdiff_continuity_probe",
    "subdifferential", "sufficient_condition",
]
