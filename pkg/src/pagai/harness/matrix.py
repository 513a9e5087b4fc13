"""The experiment matrix: every (benchmark, technique, domain) cell, pairwise comparison
tables, timings, and their JSON / text / CSV renderings."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence, Union

from .. import __version__
from ..engines import (TECHNIQUE_LABELS, TECHNIQUES, EngineConfig, InvariantMap, check_assertions,
                       run_technique, verify_inductive)
from ..pipeline import LoadedProgram, load_file, point_label, render_constraints
from ..smt.session import SolverMissing, SolverSession
from .compare import VERDICTS, ComparisonReport, aggregate_report, compare_invariants, compared_points, merge_reports
from .fuzz import soundness_fuzz

DOMAINS = ("box", "oct", "pk")
DOMAIN_LABELS = {"box": "BOX", "oct": "OCT", "pk": "PK"}
TECHNIQUE_PAIRS = [("g", "s"), ("pf", "s"), ("pf", "g"), ("gpf", "pf"), ("gpf", "g"), ("dis", "gpf")]
DOMAIN_PAIRS = [("pk", "oct"), ("pk", "box"), ("oct", "box")]
DOMAIN_PAIR_TECHNIQUE = "gpf"


@dataclass
class MatrixConfig:
    techniques: Sequence[str] = TECHNIQUES
    domains: Sequence[str] = DOMAINS
    engine: EngineConfig = field(default_factory=EngineConfig)
    inline_depth: int = 1
    unroll: bool = True
    solver: Optional[str] = None
    timeout_ms: Optional[int] = None
    seed: int = 0
    fuzz_trials: int = 0  # 0 = no soundness fuzzing
    verify: bool = False  # run the inductiveness sweep on every cell

    def to_dict(self) -> dict:
        d = asdict(self)
        d["techniques"] = list(self.techniques)
        d["domains"] = list(self.domains)
        return d


@dataclass
class Cell:
    benchmark: str
    technique: str
    domain: str
    status: str = "ok"  # ok | quarantined
    error: str = ""
    seconds: float = 0.0
    invariants: dict[str, InvariantMap] = field(default_factory=dict)
    asserts: dict[str, list[dict]] = field(default_factory=dict)
    violations: Optional[int] = None
    inductive: Optional[bool] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def downgraded(self) -> list[str]:
        return sorted(f for f, inv in self.invariants.items() if inv.downgraded)

    def to_dict(self, timings=True) -> dict:
        out = {
            "benchmark": self.benchmark,
            "technique": self.technique,
            "domain": self.domain,
            "status": self.status,
            "error": self.error,
            "downgraded": self.downgraded,
            "asserts": self.asserts,
            "invariants": {f: render_invariants(inv) for f, inv in sorted(self.invariants.items())},
        }
        if self.violations is not None:
            out["violations"] = self.violations
        if self.inductive is not None:
            out["inductive"] = self.inductive
        if timings:
            out["seconds"] = round(self.seconds, 4)
        return out


def render_invariants(inv: InvariantMap) -> dict[str, list[list[str]]]:
    """Point label -> disjuncts, each a list of constraints over source names."""
    info = inv.info
    return {point_label(info, p): [render_constraints(info, p, d) for d in inv.disjuncts.get(p, [])]
            for p in info.report_points}


@dataclass
class PairTable:
    kind: str  # technique | domain
    left: str
    right: str
    fixed: str  # the domain (technique tables) or technique (domain tables) held fixed
    rows: list[ComparisonReport] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)

    @property
    def label(self) -> str:
        names = TECHNIQUE_LABELS if self.kind == "technique" else DOMAIN_LABELS
        return f"{names[self.left]}/{names[self.right]}"

    def total(self) -> ComparisonReport:
        if not self.rows:
            return ComparisonReport("total", self.left, self.right)
        return merge_reports("total", self.rows)

    def to_dict(self, timings=True) -> dict:
        return {
            "kind": self.kind,
            "pair": self.label,
            "fixed": self.fixed,
            "rows": [r.to_dict(timings) for r in self.rows],
            "total": self.total().to_dict(timings),
            "skipped": list(self.skipped),
        }


@dataclass
class MatrixReport:
    config: MatrixConfig
    benchmarks: list[dict] = field(default_factory=list)
    cells: list[Cell] = field(default_factory=list)
    tables: list[PairTable] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)

    def cell(self, benchmark: str, technique: str, domain: str) -> Optional[Cell]:
        for c in self.cells:
            if (c.benchmark, c.technique, c.domain) == (benchmark, technique, domain):
                return c
        return None

    def timings(self) -> dict[str, dict[str, dict[str, float]]]:
        """domain -> benchmark -> technique label -> seconds (one column per technique)."""
        out: dict = {}
        for c in self.cells:
            row = out.setdefault(c.domain, {}).setdefault(c.benchmark, {})
            row[TECHNIQUE_LABELS[c.technique]] = round(c.seconds, 4) if c.ok else None
        return out

    def to_dict(self, timings=True) -> dict:
        out = {
            "tool": "pagai",
            "version": __version__,
            "config": self.config.to_dict(),
            "benchmarks": self.benchmarks,
            "cells": [c.to_dict(timings) for c in self.cells],
            "tables": [t.to_dict(timings) for t in self.tables],
            "events": self.events,
        }
        if timings:
            out["timings"] = self.timings()
        return out

    def to_json(self, timings=True) -> str:
        return json.dumps(self.to_dict(timings), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        return render_text(self)

    def to_csv(self) -> str:
        return render_csv(self)


# running ------------------------------------------------------------------------------------


def _session(config: MatrixConfig) -> SolverSession:
    return SolverSession(config.solver, config.timeout_ms)


def _assert_rows(inv: InvariantMap, verdicts: dict[int, str]) -> list[dict]:
    cfg = inv.info.cfg
    rows = []
    for aid, v in sorted(verdicts.items()):
        a = cfg.asserts[aid]
        rows.append({"line": a.line, "col": a.col, "kind": a.kind, "verdict": v})
    return rows


def run_cell(prog: LoadedProgram, technique: str, domain: str, config: MatrixConfig) -> Cell:
    """Analyze every function of ``prog``; any failure quarantines the whole cell."""
    cell = Cell(prog.name, technique, domain)
    try:
        with _session(config) as s:
            for fname, unit in sorted(prog.functions.items()):
                t0 = time.perf_counter()
                inv = run_technique(technique, unit.info, domain, s, config.engine)
                cell.seconds += time.perf_counter() - t0
                cell.invariants[fname] = inv
                cell.asserts[fname] = _assert_rows(inv, check_assertions(inv, s))
                if config.verify:
                    ok = not verify_inductive(inv, s)
                    cell.inductive = ok if cell.inductive is None else (cell.inductive and ok)
                if config.fuzz_trials:
                    n = soundness_fuzz(inv, config.fuzz_trials, config.seed)
                    cell.violations = (cell.violations or 0) + n
    except SolverMissing:
        raise
    except Exception as e:  # quarantine, never abort the matrix
        cell.status = "quarantined"
        cell.error = f"{type(e).__name__}: {e}"
        cell.invariants.clear()
        cell.asserts.clear()
    return cell


def _compare_cells(prog: LoadedProgram, a: Cell, b: Cell, session: SolverSession,
                   left: str, right: str) -> ComparisonReport:
    verdicts = []
    for fname in sorted(prog.functions):
        res = compare_invariants(session, a.invariants[fname], b.invariants[fname])
        verdicts.extend(res[p] for p in sorted(res))
    labels = {a.technique: a, b.technique: b} if a.technique != b.technique else {a.domain: a, b.domain: b}
    secs = {k: c.seconds for k, c in labels.items()}
    return aggregate_report(prog.name, left, right, verdicts, secs, prog.loc)


def _pair_tables(programs: list[LoadedProgram], report: MatrixReport, config: MatrixConfig):
    techs, doms = list(config.techniques), list(config.domains)
    wanted = []
    for d in doms:
        for l, r in TECHNIQUE_PAIRS:
            if l in techs and r in techs:
                wanted.append(PairTable("technique", l, r, d))
    fixed = DOMAIN_PAIR_TECHNIQUE if DOMAIN_PAIR_TECHNIQUE in techs else (techs[0] if techs else None)
    if fixed is not None:
        for l, r in DOMAIN_PAIRS:
            if l in doms and r in doms:
                wanted.append(PairTable("domain", l, r, fixed))
    if not wanted:
        return
    for prog in programs:
        with _session(config) as s:
            for t in wanted:
                if t.kind == "technique":
                    a = report.cell(prog.name, t.left, t.fixed)
                    b = report.cell(prog.name, t.right, t.fixed)
                else:
                    a = report.cell(prog.name, t.fixed, t.left)
                    b = report.cell(prog.name, t.fixed, t.right)
                if a is None or b is None or not (a.ok and b.ok):
                    t.skipped.append(prog.name)
                    continue
                t.rows.append(_compare_cells(prog, a, b, s, t.left, t.right))
    report.tables.extend(wanted)


def _load(p, config: MatrixConfig) -> LoadedProgram:
    if isinstance(p, LoadedProgram):
        return p
    return load_file(p, config.inline_depth, config.unroll)


def run_matrix(corpus: Sequence[Union[str, LoadedProgram]], config: Optional[MatrixConfig] = None,
               progress=None) -> MatrixReport:
    """Analyze every (program, technique, domain) cell, then build the comparison tables.

    ``progress`` (optional) is called with each finished cell.
    """
    config = config or MatrixConfig()
    programs = sorted((_load(p, config) for p in corpus), key=lambda pr: pr.name)
    report = MatrixReport(config)
    for prog in programs:
        report.benchmarks.append({
            "name": prog.name,
            "loc": prog.loc,
            "functions": sorted(prog.functions),
            "points": prog.analysis_point_count,
            "compared_points": sum(len(compared_points(u.info)) for u in prog.functions.values()),
        })
        for tech in config.techniques:
            for dom in config.domains:
                cell = run_cell(prog, tech, dom, config)
                report.cells.append(cell)
                if cell.downgraded:
                    report.events.append({"event": "downgraded", "benchmark": prog.name,
                                          "technique": tech, "domain": dom,
                                          "functions": cell.downgraded})
                if not cell.ok:
                    report.events.append({"event": "quarantined", "benchmark": prog.name,
                                          "technique": tech, "domain": dom, "error": cell.error})
                if progress is not None:
                    progress(cell)
    _pair_tables(programs, report, config)
    return report


# renderings ------------------------------------------------------------------------------


def _fmt_table(header: list[str], rows: list[list[str]]) -> list[str]:
    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    lines = ["  ".join(str(h).ljust(w) if i == 0 else str(h).rjust(w)
                       for i, (h, w) in enumerate(zip(header, widths)))]
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(str(c).ljust(w) if i == 0 else str(c).rjust(w)
                               for i, (c, w) in enumerate(zip(r, widths))))
    return lines


def _pct_row(label: str, rep: ComparisonReport) -> list[str]:
    pct = rep.percentages()
    row = [label, str(rep.points)] + [f"{pct[v]:.2f}" for v in VERDICTS]
    if rep.degenerate:
        row[-1] += " (degenerate)"
    return row


def render_text(report: MatrixReport) -> str:
    out = []
    cfg = report.config
    out.append(f"pagai {__version__} matrix: techniques {', '.join(TECHNIQUE_LABELS[t] for t in cfg.techniques)};"
               f" domains {', '.join(DOMAIN_LABELS[d] for d in cfg.domains)}")
    e = cfg.engine
    out.append(f"widening delay {e.widening_delay}, narrowing passes {e.narrowing_passes}, "
               f"max disjuncts {e.max_disjuncts}, inline depth {cfg.inline_depth}, "
               f"unroll {'on' if cfg.unroll else 'off'}, seed {cfg.seed}")
    out.append("")
    out.append("Benchmarks")
    out.extend(_fmt_table(["benchmark", "LOC", "|P_R|"],
                          [[b["name"], str(b["loc"]), str(b["points"])] for b in report.benchmarks]))
    header = ["benchmark", "points", "left-stronger %", "right-stronger %", "equal %", "uncomparable %"]
    for t in report.tables:
        out.append("")
        what = f"domain {DOMAIN_LABELS[t.fixed]}" if t.kind == "technique" else f"technique {TECHNIQUE_LABELS[t.fixed]}"
        out.append(f"{t.label} ({what})")
        rows = [_pct_row(r.label, r) for r in t.rows] + [_pct_row("total", t.total())]
        out.extend(_fmt_table(header, rows))
        if t.skipped:
            out.append(f"skipped (quarantined cells): {', '.join(t.skipped)}")
    timing = report.timings()
    labels = [TECHNIQUE_LABELS[t] for t in cfg.techniques]
    for dom in cfg.domains:
        out.append("")
        out.append(f"Time in seconds (domain {DOMAIN_LABELS[dom]})")
        rows = []
        for b in report.benchmarks:
            r = timing.get(dom, {}).get(b["name"], {})
            rows.append([b["name"]] + [("error" if r.get(l) is None else f"{r[l]:.2f}") for l in labels])
        out.extend(_fmt_table(["benchmark"] + labels, rows))
    proved = [c for c in report.cells if c.ok]
    out.append("")
    out.append("Assertions proved")
    rows = []
    for c in proved:
        total = sum(len(v) for v in c.asserts.values())
        if not total:
            continue
        n = sum(1 for v in c.asserts.values() for a in v if a["verdict"] == "proved")
        rows.append([c.benchmark, TECHNIQUE_LABELS[c.technique], DOMAIN_LABELS[c.domain], f"{n}/{total}"])
    if rows:
        out.extend(_fmt_table(["benchmark", "technique", "domain", "proved"], rows))
    if report.events:
        out.append("")
        out.append("Events")
        for ev in report.events:
            detail = ev.get("error") or ", ".join(ev.get("functions", []))
            out.append(f"{ev['event']}: {ev['benchmark']} {TECHNIQUE_LABELS[ev['technique']]}/"
                       f"{DOMAIN_LABELS[ev['domain']]} {detail}")
    return "\n".join(out) + "\n"


def render_csv(report: MatrixReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["table", "pair", "fixed", "benchmark", "points", "left_stronger", "right_stronger",
                "equal", "uncomparable", "degenerate"])
    for t in report.tables:
        name = "techniques" if t.kind == "technique" else "domains"
        for r in t.rows + [t.total()]:
            pct = r.percentages()
            w.writerow([name, t.label, t.fixed, r.label, r.points] + [f"{pct[v]:.2f}" for v in VERDICTS]
                       + [int(r.degenerate)])
    w.writerow([])
    labels = [TECHNIQUE_LABELS[t] for t in report.config.techniques]
    w.writerow(["timings", "domain", "benchmark"] + labels)
    timing = report.timings()
    for dom in report.config.domains:
        for b in report.benchmarks:
            r = timing.get(dom, {}).get(b["name"], {})
            w.writerow(["timings", dom, b["name"]] + ["" if r.get(l) is None else f"{r[l]:.4f}" for l in labels])
    return buf.getvalue()
