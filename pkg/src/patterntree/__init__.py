"""Pattern-tree rule scheduling for peephole quantum circuit optimization."""
from .circuit import Circuit, Gate, canonicalize, emit_circuit, parse_circuit
from .matching import MatchingContext, MatchStats, match
from .pattern import CircuitPattern, TransformationRule, load_rules, save_rules, validate_rule
from .preprocess import float_rz, group_rz
from .scheduler import OptimizeConfig, OptimizeReport, optimize, optimize_without_tree
from .semantics import circuit_unitary, verify_equivalence
from .tree import build_sched_tree, build_trie, candidate_count, generate_prefix_rules

__all__ = [
    "Circuit",
    "CircuitPattern",
    "Gate",
    "MatchStats",
    "MatchingContext",
    "OptimizeConfig",
    "OptimizeReport",
    "TransformationRule",
    "build_sched_tree",
    "build_trie",
    "candidate_count",
    "canonicalize",
    "circuit_unitary",
    "emit_circuit",
    "float_rz",
    "generate_prefix_rules",
    "group_rz",
    "load_rules",
    "match",
    "optimize",
    "optimize_without_tree",
    "parse_circuit",
    "save_rules",
    "validate_rule",
    "verify_equivalence",
]
