"""Class likelihoods and posteriors from conjunctive rule marginals, as a minimum-norm linear solve."""

from .constraint import (ConstraintError, ConstraintSystem, OverlapCounts, build_b, build_C,
                         build_system, build_w, overlap_counts)
from .inference import (Engine, InferenceError, InferenceResult, Nonnegativity,
                        UndefinedPosteriorError, clamp_resolve, classify, likelihood,
                        posterior_odds, verify_nonnegativity)
from .linalg import (MaintainedInverse, SingularMatrixError, Tolerances, invert, pseudo_solve,
                     solve_spd, swap_row_col)
from .rulebase import (AttributeSpace, ClassModel, Evidence, Literal, Rule, RuleBase,
                       RuleBaseError, RuleIndex, firing_rules, make_rule, parse_evidence,
                       parse_rulebase, serialize_rulebase)

__version__ = "0.1.0"

__all__ = [
    "AttributeSpace", "ClassModel", "ConstraintError", "ConstraintSystem", "Engine", "Evidence",
    "InferenceError", "InferenceResult", "Literal", "MaintainedInverse", "Nonnegativity",
    "OverlapCounts", "Rule", "RuleBase", "RuleBaseError", "RuleIndex", "SingularMatrixError",
    "Tolerances", "UndefinedPosteriorError", "build_C", "build_b", "build_system", "build_w",
    "clamp_resolve", "classify", "firing_rules", "invert", "likelihood", "make_rule",
    "overlap_counts", "parse_evidence", "parse_rulebase", "posterior_odds", "pseudo_solve",
    "serialize_rulebase", "solve_spd", "swap_row_col", "verify_nonnegativity",
]
