"""Symbolic toolkit for exact, invariant, conditional and partial symmetries
of PDEs: prolongation, canonical charts, reduction and a numeric
factorization oracle."""

__version__ = "0.1.0"

from .expr import Context, JetVariable, ParseError, is_zero, normalize, parse, substitute, to_text, zero_test
from .fields import LiePointField, apply, characteristic, parse_field, prolong
from .charts import CanonicalChart, derive_chart, parse_chart, transform_equation, verify_chart
from .classify import (
    ClassificationReport,
    check_augmented_symmetry,
    check_exact_symmetry,
    check_invariance,
    check_partial_symmetry,
    check_true_cs,
    classify,
    classify_weak_cs,
)
from .reduction import extract_factored_form, lift_invariant_solution, reduced_system, verify_solution

__all__ = [
    "CanonicalChart",
    "ClassificationReport",
    "Context",
    "JetVariable",
    "LiePointField",
    "ParseError",
    "apply",
    "characteristic",
    "check_augmented_symmetry",
    "check_exact_symmetry",
    "check_invariance",
    "check_partial_symmetry",
    "check_true_cs",
    "classify",
    "classify_weak_cs",
    "derive_chart",
    "extract_factored_form",
    "is_zero",
    "lift_invariant_solution",
    "normalize",
    "parse",
    "parse_chart",
    "parse_field",
    "prolong",
    "reduced_system",
    "substitute",
    "to_text",
    "transform_equation",
    "verify_chart",
    "verify_solution",
    "zero_test",
]
