"""Inclusion comparison of invariants (any domains, disjunctive or not) through SMT."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..linear import Constraint
from ..smt.encode import render_value, smt_sort
from ..smt.sexpr import quote
from ..smt.session import SolverError, SolverSession

LEFT = "left-stronger"
RIGHT = "right-stronger"
EQUAL = "equal"
UNCOMPARABLE = "uncomparable"
VERDICTS = (LEFT, RIGHT, EQUAL, UNCOMPARABLE)

_PREFIX = "cmp!"


def flip(verdict: str) -> str:
    return {LEFT: RIGHT, RIGHT: LEFT}.get(verdict, verdict)


@dataclass
class PointComparison:
    verdict: str
    flagged: bool = False  # an inconclusive solver answer was turned into "uncomparable"


def _included(session: SolverSession, a: str, b: str, decls: list[str]) -> Optional[bool]:
    """Is A ⊆ B, i.e. is A ∧ ¬B unsatisfiable? None when the solver cannot tell."""
    session.push()
    try:
        for d in decls:
            session.send(d)
        status, _ = session.solve([a, f"(not {b})"], want_model=False)
    finally:
        session.pop()
    if status == "unknown":
        return None
    return status == "unsat"


def compare_point(session: SolverSession, left: Sequence[Sequence[Constraint]],
                  right: Sequence[Sequence[Constraint]], sorts: dict[str, str]) -> PointComparison:
    """Compare two invariants given as disjunct lists of constraint lists ([] = empty set).

    ``sorts`` maps every variable to ``Int`` or ``Real``.
    """
    def name(v):
        return quote(_PREFIX + v)

    def sort_of(v):
        return sorts.get(v, "Int")

    names = set()
    for side in (left, right):
        for d in side:
            for c in d:
                names |= c.vars()
    decls = [f"(declare-fun {name(v)} () {sort_of(v)})" for v in sorted(names)]
    a = render_value(left, name, sort_of)
    b = render_value(right, name, sort_of)
    try:
        ab = _included(session, a, b, decls)
        ba = _included(session, b, a, decls)
    except SolverError:
        return PointComparison(UNCOMPARABLE, True)
    if ab is None or ba is None:
        return PointComparison(UNCOMPARABLE, True)
    if ab and ba:
        return PointComparison(EQUAL)
    if ab:
        return PointComparison(LEFT)
    if ba:
        return PointComparison(RIGHT)
    return PointComparison(UNCOMPARABLE)


@dataclass
class ComparisonReport:
    """Verdict counts and percentages for one (benchmark or total, pair) row."""
    label: str
    left: str
    right: str
    counts: dict[str, int] = field(default_factory=lambda: {v: 0 for v in VERDICTS})
    seconds: dict[str, float] = field(default_factory=dict)
    flagged: int = 0
    loc: int = 0

    @property
    def points(self) -> int:
        return sum(self.counts.values())

    @property
    def degenerate(self) -> bool:
        return self.points == 0

    def percentages(self) -> dict[str, float]:
        n = self.points
        if n == 0:
            return {v: 0.0 for v in VERDICTS}
        return {v: round(100.0 * self.counts[v] / n, 2) for v in VERDICTS}

    def to_dict(self, timings=True) -> dict:
        out = {
            "label": self.label,
            "pair": f"{self.left}/{self.right}",
            "points": self.points,
            "loc": self.loc,
            "degenerate": self.degenerate,
            "counts": dict(self.counts),
            "percent": self.percentages(),
            "flagged": self.flagged,
        }
        if timings:
            out["seconds"] = {k: round(v, 4) for k, v in self.seconds.items()}
        return out


def aggregate_report(label: str, left: str, right: str, verdicts: Sequence[PointComparison],
                     timings: Optional[dict[str, float]] = None, loc: int = 0) -> ComparisonReport:
    rep = ComparisonReport(label, left, right, loc=loc)
    for v in verdicts:
        rep.counts[v.verdict] += 1
        rep.flagged += int(v.flagged)
    rep.seconds = dict(timings or {})
    return rep


def merge_reports(label: str, reports: Sequence[ComparisonReport]) -> ComparisonReport:
    if not reports:
        raise ValueError("nothing to merge")
    out = ComparisonReport(label, reports[0].left, reports[0].right)
    for r in reports:
        for v in VERDICTS:
            out.counts[v] += r.counts[v]
        out.flagged += r.flagged
        out.loc += r.loc
        for k, s in r.seconds.items():
            out.seconds[k] = out.seconds.get(k, 0.0) + s
    return out


def compared_points(info) -> list[int]:
    """Points entering the comparison tables: the analysis points other than the entry
    (the entry value is the unconstrained precondition for every technique)."""
    return sorted(p for p in info.analysis_points if p != info.cfg.entry)


def compare_invariants(session: SolverSession, left, right) -> dict[int, PointComparison]:
    """Point-by-point comparison of two invariant maps of the same function."""
    info = left.info
    sorts = {v: smt_sort(t) for v, t in info.cfg.var_types.items()}
    return {p: compare_point(session, left.constraint_sets(p), right.constraint_sets(p), sorts)
            for p in compared_points(info)}
