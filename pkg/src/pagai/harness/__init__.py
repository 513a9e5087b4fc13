"""Comparison tables, the experiment matrix and the soundness fuzzer."""

from .compare import (EQUAL, LEFT, RIGHT, UNCOMPARABLE, VERDICTS, ComparisonReport, PointComparison,
                      aggregate_report, compare_invariants, compare_point, compared_points, flip,
                      merge_reports)
from .fuzz import collect_states, soundness_fuzz, violations
from .matrix import (DOMAIN_PAIRS, DOMAINS, TECHNIQUE_PAIRS, Cell, MatrixConfig, MatrixReport,
                     PairTable, render_csv, render_text, run_cell, run_matrix)

__all__ = [
    "Cell", "ComparisonReport", "DOMAINS", "DOMAIN_PAIRS", "EQUAL", "LEFT", "MatrixConfig",
    "MatrixReport", "PairTable", "PointComparison", "RIGHT", "TECHNIQUE_PAIRS", "UNCOMPARABLE",
    "VERDICTS", "aggregate_report", "collect_states", "compare_invariants", "compare_point",
    "compared_points", "flip", "merge_reports", "render_csv", "render_text", "run_cell",
    "run_matrix", "soundness_fuzz", "violations",
]
