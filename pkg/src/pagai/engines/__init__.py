"""Fixpoint engines and assertion checking."""

from __future__ import annotations

import time
from typing import Optional

from ..ir import CfgAnalysisInfo
from ..smt.encode import check_growth, fail_reachability
from ..smt.session import SolverInconclusive, SolverSession
from .classic import analyze_classic, analyze_guided, classic_values
from .common import (TECHNIQUE_LABELS, TECHNIQUES, BudgetExceeded, EngineConfig, InvariantMap,
                     TransferCache, transfers)
from .focus import (DisjunctivePolicy, analyze_combined, analyze_disjunctive, analyze_path_focusing,
                    section)

SMT_TECHNIQUES = ("pf", "gpf", "dis")


def run_technique(technique: str, info: CfgAnalysisInfo, domain: str,
                  session: Optional[SolverSession] = None, config: EngineConfig = None) -> InvariantMap:
    """Run one technique. An inconclusive solver answer makes the SMT-based techniques fall
    back to the classic engine; the result is then flagged as downgraded."""
    config = config or EngineConfig()
    if technique == "s":
        return analyze_classic(info, domain, config)
    if technique == "g":
        return analyze_guided(info, domain, config)
    if technique not in SMT_TECHNIQUES:
        raise ValueError(f"unknown technique {technique!r}")
    if session is None:
        raise ValueError(f"technique {technique} needs a solver session")
    t0 = time.perf_counter()
    try:
        if technique == "pf":
            return analyze_path_focusing(info, domain, session, config)
        if technique == "gpf":
            return analyze_combined(info, domain, session, config)
        return analyze_disjunctive(info, domain, session, config)
    except SolverInconclusive as e:
        _unwind(session)
        inv = analyze_classic(info, domain, config)
        inv.technique = technique
        inv.downgraded = True
        inv.diagnostics.append(f"downgraded to S: {e}")
        inv.seconds = time.perf_counter() - t0
        return inv


def _unwind(session: SolverSession):
    try:
        while session.depth:
            session.pop()
    except Exception:
        session.key = None


def _values(inv: InvariantMap) -> dict[int, list]:
    return {p: inv.constraint_sets(p) for p in inv.info.analysis_points}


def check_assertions(inv: InvariantMap, session: SolverSession) -> dict[int, str]:
    """``proved`` / ``unproved`` for every assert of the function.

    An assert is proved when no path from an analysis point, starting in its invariant,
    reaches the failure block through that assert's failing edge.
    """
    info = inv.info
    if not info.cfg.asserts:
        return {}
    f = section(info)
    _unwind(session)
    try:
        reach = fail_reachability(session, f, _values(inv))
    except SolverInconclusive:
        _unwind(session)
        return {aid: "unproved" for aid in info.cfg.asserts}
    return {aid: ("unproved" if r else "proved") for aid, r in reach.items()}


def verify_inductive(inv: InvariantMap, session: SolverSession) -> list[tuple[int, list[int]]]:
    """Growth sweep: every (source, path) whose image escapes the invariant at its target.
    An empty list certifies the invariant map as inductive."""
    info = inv.info
    f = section(info)
    _unwind(session)
    targets = {q: inv.constraint_sets(q) for q in info.report_points if q != info.cfg.entry}
    out = []
    for p in sorted(info.analysis_points):
        for d in inv.disjuncts.get(p, []):
            if d.is_bottom():
                continue
            r = check_growth(session, f, p, [d.to_constraints()], targets)
            if r is not None:
                out.append((p, r.path))
    return out


__all__ = [
    "BudgetExceeded", "DisjunctivePolicy", "EngineConfig", "InvariantMap", "SMT_TECHNIQUES",
    "TECHNIQUES", "TECHNIQUE_LABELS", "TransferCache", "analyze_classic", "analyze_combined",
    "analyze_disjunctive", "analyze_guided", "analyze_path_focusing", "check_assertions",
    "classic_values", "run_technique", "section", "transfers", "verify_inductive",
]
