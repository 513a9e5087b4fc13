"""Command-line driver: ``pagai analyze``, ``pagai matrix`` and ``pagai compare``."""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

from . import __version__
from .engines import TECHNIQUE_LABELS, TECHNIQUES, EngineConfig, check_assertions, run_technique
from .frontend.parser import SourceError
from .harness import DOMAINS, VERDICTS, MatrixConfig, aggregate_report, compare_invariants, run_matrix
from .harness.matrix import render_invariants
from .ir import dump_cfg
from .pipeline import LoadedProgram, load_file, point_label, render_constraints
from .smt.session import SolverMissing, SolverSession

EXIT_OK, EXIT_UNPROVED, EXIT_ERROR = 0, 1, 2


@dataclass
class RunConfig:
    paths: list[str] = field(default_factory=list)
    technique: str = "gpf"
    domain: str = "pk"
    solver: Optional[str] = None
    timeout_ms: Optional[int] = None
    engine: EngineConfig = field(default_factory=EngineConfig)
    inline_depth: int = 1
    unroll: bool = True
    format: str = "text"  # text | json | csv
    dump_cfg: bool = False
    dump_smt: Optional[str] = None
    seed: int = 0

    def echo(self) -> dict:
        e = self.engine
        return {"technique": self.technique, "domain": self.domain, "widening_delay": e.widening_delay,
                "narrowing_passes": e.narrowing_passes, "max_disjuncts": e.max_disjuncts,
                "inline_depth": self.inline_depth, "unroll": self.unroll, "seed": self.seed,
                "solver": self.solver or "z3 -in", "timeout_ms": self.timeout_ms}


def _engine_args(p: argparse.ArgumentParser):
    p.add_argument("--widening-delay", type=int, default=2, metavar="D",
                   help="ascending updates before widening (default 2)")
    p.add_argument("--narrowing-passes", type=int, default=2, metavar="N",
                   help="descending passes after stabilization (default 2)")
    p.add_argument("--max-disjuncts", type=int, default=5, metavar="K",
                   help="disjuncts per loop head for the disjunctive technique (default 5)")
    p.add_argument("--inline-depth", type=int, default=1, help="call inlining depth (default 1)")
    p.add_argument("--no-unroll", action="store_true", help="do not unroll loops once")
    p.add_argument("--solver", default=None, help='SMT solver command line (default "z3 -in")')
    p.add_argument("--solver-timeout", "--timeout", dest="timeout", type=int, default=None, metavar="MS",
                   help="per-query solver timeout")
    p.add_argument("--seed", type=int, default=0, help="random seed (fuzzing)")


def _engine_config(a) -> EngineConfig:
    return EngineConfig(widening_delay=a.widening_delay, narrowing_passes=a.narrowing_passes,
                        max_disjuncts=a.max_disjuncts)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pagai", description="Numerical invariants and assertion checking "
                                 "for mini-language programs.")
    ap.add_argument("--version", action="version", version=f"pagai {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    an = sub.add_parser("analyze", help="analyze source files and check their assertions")
    an.add_argument("paths", nargs="+")
    an.add_argument("--technique", choices=TECHNIQUES, default="gpf")
    an.add_argument("--domain", choices=DOMAINS, default="pk")
    an.add_argument("--format", choices=("text", "json", "csv"), default="text")
    an.add_argument("--dump-cfg", action="store_true", help="print the annotated graphs first")
    an.add_argument("--dump-smt", metavar="FILE", default=None, help="write the solver transcript to FILE")
    _engine_args(an)

    mx = sub.add_parser("matrix", help="run every technique/domain on a corpus and compare them")
    mx.add_argument("paths", nargs="+", help="files or directories of .mimp programs")
    mx.add_argument("--all", action="store_true", help="all techniques and domains (the default)")
    mx.add_argument("--techniques", default=",".join(TECHNIQUES))
    mx.add_argument("--domains", default=",".join(DOMAINS))
    mx.add_argument("--format", choices=("text", "json", "csv"), default="text")
    mx.add_argument("--output", "-o", default=None, help="write the report to a file")
    mx.add_argument("--mask-timings", action="store_true", help="omit timings from the JSON report")
    mx.add_argument("--fuzz-trials", type=int, default=0, help="soundness fuzzing trials per cell")
    mx.add_argument("--verify", action="store_true", help="certify every cell's invariants as inductive")
    _engine_args(mx)

    cp = sub.add_parser("compare", help="compare two technique/domain runs on one file, point by point")
    cp.add_argument("path")
    cp.add_argument("--left", default="gpf/pk", help="technique/domain (default gpf/pk)")
    cp.add_argument("--right", default="s/pk", help="technique/domain (default s/pk)")
    cp.add_argument("--format", choices=("text", "json"), default="text")
    _engine_args(cp)
    return ap


def _expand(paths: list[str]) -> list[str]:
    out = []
    for p in paths:
        if os.path.isdir(p):
            out.extend(sorted(glob.glob(os.path.join(p, "*.mimp"))))
        else:
            out.append(p)
    return out


def _err(msg: str):
    print(f"pagai: {msg}", file=sys.stderr)


# analyze ------------------------------------------------------------------------------------


def analyze_program(prog: LoadedProgram, cfg: RunConfig, session: SolverSession):
    """Per-function results: (name, invariant map, assert verdicts)."""
    out = []
    for fname, unit in prog.functions.items():
        inv = run_technique(cfg.technique, unit.info, cfg.domain, session, cfg.engine)
        out.append((fname, inv, check_assertions(inv, session)))
    return out


def _text_result(prog: LoadedProgram, results) -> list[str]:
    lines = []
    for fname, inv, verdicts in results:
        info = inv.info
        lines.append(f"function {fname}:")
        if inv.downgraded:
            lines.append("  (solver inconclusive: analyzed with the classic engine)")
        for p in info.report_points:
            ds = inv.disjuncts.get(p, [])
            lines.append(f"  {point_label(info, p)}:")
            if not ds:
                lines.append("    unreachable")
            for k, d in enumerate(ds):
                cs = render_constraints(info, p, d)
                indent = "    "
                if len(ds) > 1:
                    lines.append(f"    disjunct {k + 1}:")
                    indent = "      "
                if not cs:
                    lines.append(indent + "true")
                lines.extend(indent + c for c in cs)
        for aid, v in sorted(verdicts.items()):
            line = info.cfg.asserts[aid].line
            lines.append(f"  assert at line {line}: proved" if v == "proved"
                         else f"  possible assertion failure at line {line}")
    return lines


def _json_result(prog: LoadedProgram, results) -> dict:
    funcs = {}
    for fname, inv, verdicts in results:
        cfg = inv.info.cfg
        funcs[fname] = {
            "invariants": render_invariants(inv),
            "asserts": [{"line": cfg.asserts[a].line, "col": cfg.asserts[a].col, "verdict": v}
                        for a, v in sorted(verdicts.items())],
            "downgraded": inv.downgraded,
            "seconds": round(inv.seconds, 4),
        }
    return {"program": prog.name, "functions": funcs}


def _csv_rows(prog: LoadedProgram, results) -> list[list]:
    rows = []
    for fname, inv, verdicts in results:
        info = inv.info
        for p in info.report_points:
            for k, d in enumerate(inv.disjuncts.get(p, [])):
                for c in render_constraints(info, p, d) or ["true"]:
                    rows.append([prog.name, fname, point_label(info, p), k + 1, c])
        for aid, v in sorted(verdicts.items()):
            rows.append([prog.name, fname, f"assert line {info.cfg.asserts[aid].line}", "", v])
    return rows


def cmd_analyze(a) -> int:
    cfg = RunConfig(paths=a.paths, technique=a.technique, domain=a.domain, solver=a.solver,
                    timeout_ms=a.timeout, engine=_engine_config(a), inline_depth=a.inline_depth,
                    unroll=not a.no_unroll, format=a.format, dump_cfg=a.dump_cfg, dump_smt=a.dump_smt,
                    seed=a.seed)
    dump = open(cfg.dump_smt, "w", encoding="utf-8") if cfg.dump_smt else None
    status = EXIT_OK
    reports = []
    rows = []
    try:
        try:
            session = SolverSession(cfg.solver, cfg.timeout_ms, dump=dump)
        except SolverMissing as e:
            _err(f"cannot start the SMT solver: {' '.join(e.command)}")
            return EXIT_ERROR
        with session:
            for path in cfg.paths:
                try:
                    prog = load_file(path, cfg.inline_depth, cfg.unroll)
                except SourceError as e:
                    _err(f"{path}:{e}")
                    status = EXIT_ERROR
                    continue
                except OSError as e:
                    _err(str(e))
                    status = EXIT_ERROR
                    continue
                if cfg.dump_cfg:
                    for unit in prog.functions.values():
                        print(dump_cfg(unit.info))
                try:
                    results = analyze_program(prog, cfg, session)
                except Exception as e:
                    _err(f"{path}: analysis failed: {type(e).__name__}: {e}")
                    status = EXIT_ERROR
                    continue
                if any(v != "proved" for _, _, vs in results for v in vs.values()) and status == EXIT_OK:
                    status = EXIT_UNPROVED
                if cfg.format == "text":
                    if len(cfg.paths) > 1:
                        print(f"== {path}")
                    print("\n".join(_text_result(prog, results)))
                elif cfg.format == "json":
                    reports.append(_json_result(prog, results))
                else:
                    rows.extend(_csv_rows(prog, results))
    finally:
        if dump is not None:
            dump.close()
    if cfg.format == "json":
        print(json.dumps({"tool": "pagai", "version": __version__, "config": cfg.echo(),
                          "programs": reports}, indent=2, sort_keys=True))
    elif cfg.format == "csv":
        import csv
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["program", "function", "point", "disjunct", "constraint"])
        w.writerows(rows)
    return status


# matrix / compare ------------------------------------------------------------------------


def _split(s: str, allowed) -> list[str]:
    items = [x.strip() for x in s.split(",") if x.strip()]
    bad = [x for x in items if x not in allowed]
    if bad:
        raise SystemExit(f"pagai: unknown choice(s) {', '.join(bad)}; expected {', '.join(allowed)}")
    return items


def cmd_matrix(a) -> int:
    techs = list(TECHNIQUES) if a.all else _split(a.techniques, TECHNIQUES)
    doms = list(DOMAINS) if a.all else _split(a.domains, DOMAINS)
    config = MatrixConfig(techs, doms, _engine_config(a), a.inline_depth, not a.no_unroll, a.solver,
                          a.timeout, a.seed, a.fuzz_trials, a.verify)
    paths = _expand(a.paths)
    if not paths:
        _err("no input programs")
        return EXIT_ERROR
    try:
        report = run_matrix(paths, config)
    except SolverMissing as e:
        _err(f"cannot start the SMT solver: {' '.join(e.command)}")
        return EXIT_ERROR
    except (SourceError, OSError) as e:
        _err(str(e))
        return EXIT_ERROR
    if a.format == "json":
        text = report.to_json(timings=not a.mask_timings)
    elif a.format == "csv":
        text = report.to_csv()
    else:
        text = report.to_text()
    if a.output:
        with open(a.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_ERROR if any(not c.ok for c in report.cells) else EXIT_OK


def _tech_dom(s: str) -> tuple[str, str]:
    t, _, d = s.partition("/")
    d = d or "pk"
    if t not in TECHNIQUES or d not in DOMAINS:
        raise SystemExit(f"pagai: expected technique/domain, got {s!r}")
    return t, d


def cmd_compare(a) -> int:
    lt, ld = _tech_dom(a.left)
    rt, rd = _tech_dom(a.right)
    try:
        prog = load_file(a.path, a.inline_depth, not a.no_unroll)
    except (SourceError, OSError) as e:
        _err(f"{a.path}:{e}")
        return EXIT_ERROR
    try:
        session = SolverSession(a.solver, a.timeout)
    except SolverMissing as e:
        _err(f"cannot start the SMT solver: {' '.join(e.command)}")
        return EXIT_ERROR
    engine = _engine_config(a)
    left_name = f"{TECHNIQUE_LABELS[lt]}:{ld}"
    right_name = f"{TECHNIQUE_LABELS[rt]}:{rd}"
    rows, verdicts = [], []
    with session:
        for fname, unit in prog.functions.items():
            li = run_technique(lt, unit.info, ld, session, engine)
            ri = run_technique(rt, unit.info, rd, session, engine)
            res = compare_invariants(session, li, ri)
            for p, v in sorted(res.items()):
                rows.append((fname, point_label(unit.info, p), v.verdict))
                verdicts.append(v)
    rep = aggregate_report(prog.name, left_name, right_name, verdicts, loc=prog.loc)
    if a.format == "json":
        print(json.dumps({"points": [{"function": f, "point": p, "verdict": v} for f, p, v in rows],
                          "summary": rep.to_dict(timings=False)}, indent=2, sort_keys=True))
        return EXIT_OK
    for f, p, v in rows:
        print(f"{f} {p}: {v}")
    pct = rep.percentages()
    print(f"{left_name}/{right_name} over {rep.points} points: "
          + ", ".join(f"{k} {pct[k]:.2f}%" for k in VERDICTS)
          + (" (degenerate)" if rep.degenerate else ""))
    return EXIT_OK


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    handler = {"analyze": cmd_analyze, "matrix": cmd_matrix, "compare": cmd_compare}[a.command]
    return handler(a)


if __name__ == "__main__":
    sys.exit(main())
