"""SMT-LIB 2 solver sessions and the loop-free section encoding."""

from .encode import SectionFormula, check_growth, encode_section, fail_reachability, model_to_path
from .session import (SolverError, SolverInconclusive, SolverMissing, SolverSession)

__all__ = ["SectionFormula", "SolverError", "SolverInconclusive", "SolverMissing", "SolverSession",
           "check_growth", "encode_section", "fail_reachability", "model_to_path"]
