"""Source text -> analysis-ready SSA graphs, and invariants mapped back to source names."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

from .domains import AbstractValue
from .frontend import ast as A
from .frontend.cfg import Cfg, lower_to_cfg
from .frontend.parser import parse
from .frontend.passes import inline_calls, unroll_loops_once
from .frontend.ssa import to_ssa
from .ir import CfgAnalysisInfo, analyze_cfg
from .linear import Constraint, Linear


@dataclass
class FunctionUnit:
    name: str
    cfg: Cfg  # SSA
    info: CfgAnalysisInfo


@dataclass
class LoadedProgram:
    name: str
    source: str
    program: A.Program
    functions: dict[str, FunctionUnit] = field(default_factory=dict)
    inline_depth: int = 1
    unroll: bool = True

    @property
    def loc(self) -> int:
        """Non-blank, non-comment-only source lines."""
        n = 0
        for line in self.source.splitlines():
            s = line.strip()
            if s and not s.startswith("//"):
                n += 1
        return n

    @property
    def analysis_point_count(self) -> int:
        return sum(len(u.info.analysis_points) for u in self.functions.values())


def build_function(cfg: Cfg, unroll: bool = True) -> FunctionUnit:
    if unroll:
        cfg = unroll_loops_once(cfg)
    ssa = to_ssa(cfg)
    return FunctionUnit(ssa.name, ssa, analyze_cfg(ssa))


def load_source(source: str, name: str = "<input>", inline_depth: int = 1,
                unroll: bool = True) -> LoadedProgram:
    """parse -> inline -> lower -> (unroll once) -> SSA -> cut points and dimensions."""
    program = parse(source)
    inlined = inline_calls(program, inline_depth)
    cfgs = lower_to_cfg(inlined)
    out = LoadedProgram(name, source, program, inline_depth=inline_depth, unroll=unroll)
    for fname, cfg in cfgs.items():
        out.functions[fname] = build_function(cfg, unroll)
    return out


def load_file(path: str, inline_depth: int = 1, unroll: bool = True) -> LoadedProgram:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    name = os.path.splitext(os.path.basename(path))[0]
    return load_source(text, name, inline_depth, unroll)


# source-level view ------------------------------------------------------------------------


def _internal(cfg: Cfg, v: str) -> bool:
    return cfg.source_name(v).startswith("__t")


def view_dims(info: CfgAnalysisInfo, p: int) -> list[str]:
    """Variables shown at ``p``: the dimensions plus live linearly-defined variables,
    without compiler temporaries."""
    cfg = info.cfg
    names = set(info.dims[p]) | set(info.view_exprs(p))
    return sorted(v for v in names if not _internal(cfg, v))


def materialize(info: CfgAnalysisInfo, p: int, value: AbstractValue) -> AbstractValue:
    """Add the live linearly-defined variables (equal to their affine forms) and project out
    temporaries."""
    exprs = info.view_exprs(p)
    full = list(value.dims) + [v for v in sorted(exprs) if v not in value.dims]
    v = value.adapt_dims(full)
    eqs = [Constraint.eq(Linear.var(x), e) for x, e in sorted(exprs.items())]
    if eqs and not v.is_bottom():
        v = v.meet_constraints(eqs)
    return v.adapt_dims(view_dims(info, p))


def source_names(info: CfgAnalysisInfo, p: int) -> dict[str, str]:
    """SSA name -> printed name: the source name, qualified with ``@line`` of the defining
    statement when several versions of the same variable are visible."""
    cfg = info.cfg
    vs = view_dims(info, p)
    base: dict[str, list[str]] = {}
    for v in vs:
        base.setdefault(cfg.source_name(v), []).append(v)
    out = {}
    for b, group in base.items():
        if len(group) == 1:
            out[group[0]] = b
            continue
        for v in group:
            line = cfg.var_line.get(v, 0)
            out[v] = f"{b}@{line}"
        if len(set(out[v] for v in group)) < len(group):
            for v in group:
                out[v] = f"{b}@{v.rsplit('.', 1)[-1]}" if "." in v else v
    return out


def render_constraints(info: CfgAnalysisInfo, p: int, value: AbstractValue) -> list[str]:
    """Constraint lines over source-level names (empty for top, ``false`` for bottom)."""
    if value.is_bottom():
        return ["false"]
    v = materialize(info, p, value)
    names = source_names(info, p)
    return [str(c.rename(names)) for c in v.to_constraints()]


def point_label(info: CfgAnalysisInfo, p: int) -> str:
    cfg = info.cfg
    blk = cfg.blocks[p]
    if p == cfg.entry:
        role = "entry"
    elif p == cfg.exit:
        role = "exit"
    elif p in info.widening_points:
        role = "loop head"
    else:
        role = "point"
    line = f", line {blk.line}" if blk.line else ""
    return f"bb{p} ({role}{line})"


__all__ = ["FunctionUnit", "LoadedProgram", "build_function", "load_file", "load_source",
           "materialize", "point_label", "render_constraints", "source_names", "view_dims",
           "Optional"]
