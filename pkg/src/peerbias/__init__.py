"""Statistical tests and Monte Carlo experiments for detecting identity bias
in single-blind versus double-blind review."""

from .core import (AcceptanceMatrix, Assignment, ConditionAllocation,
                   DecisionTuple, PropertyVector, RngStream, TestOutcome,
                   build_tuples, sample_decisions, validate_tuple_set)
from .stattests import (PermutationPlan, counting_test, disagreement_test,
                        multiprop_linear_test, multiprop_logistic_test,
                        permutation_two_sample, wald_baseline_test)

__all__ = [
    "AcceptanceMatrix", "Assignment", "ConditionAllocation", "DecisionTuple",
    "PropertyVector", "RngStream", "TestOutcome", "build_tuples",
    "sample_decisions", "validate_tuple_set", "PermutationPlan",
    "counting_test", "disagreement_test", "multiprop_linear_test",
    "multiprop_logistic_test", "permutation_two_sample", "wald_baseline_test",
]

__version__ = "0.1.0"
