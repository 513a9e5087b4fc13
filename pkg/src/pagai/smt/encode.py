"""SMT encoding of the loop-free paths between analysis points, and the queries on it.

Each analysis point is split into a *source* copy (its out-edges and its own
definitions) and a *sink* copy (its in-edges and phis, whose values get a ``__sink``
suffix). Because the widening points cut every cycle, the resulting graph is acyclic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from ..frontend.ast import INT, REAL
from ..frontend.cfg import BinOp, Cond, Const, Havoc, Var, const_value
from ..ir import CfgAnalysisInfo, int_division
from ..linear import EQ, Constraint, Linear
from .sexpr import quote
from .session import SolverInconclusive, SolverSession

SINK = "__sink"

Node = tuple[str, int]  # ("src" | "sink" | "blk", block)


def smt_sort(typ: str) -> str:
    return "Real" if typ == REAL else "Int"


def render_number(q: Fraction, sort: str) -> str:
    q = Fraction(q)
    if sort == "Int":
        if q.denominator != 1:
            raise ValueError(f"non-integral constant {q} in integer context")
        s = str(abs(q.numerator))
    elif q.denominator == 1:
        s = f"{abs(q.numerator)}.0"
    else:
        s = f"(/ {abs(q.numerator)}.0 {q.denominator}.0)"
    return f"(- {s})" if q < 0 else s


def _and(parts: list[str]) -> str:
    parts = [p for p in parts if p != "true"]
    if not parts:
        return "true"
    if "false" in parts:
        return "false"
    return parts[0] if len(parts) == 1 else f"(and {' '.join(parts)})"


def _or(parts: list[str]) -> str:
    parts = [p for p in parts if p != "false"]
    if not parts:
        return "false"
    if "true" in parts:
        return "true"
    return parts[0] if len(parts) == 1 else f"(or {' '.join(parts)})"


def render_linear(e: Linear, name, sort_of, sort: Optional[str] = None) -> str:
    """Affine form in the given sort (Real if any variable is real)."""
    if sort is None:
        sort = "Real" if any(sort_of(v) == "Real" for v in e.coeffs) else "Int"
        if any(k.denominator != 1 for k in e.coeffs.values()) or e.const.denominator != 1:
            sort = "Real"
    terms = []
    for v in sorted(e.coeffs):
        k = e.coeffs[v]
        x = name(v)
        if sort == "Real" and sort_of(v) == "Int":
            x = f"(to_real {x})"
        terms.append(x if k == 1 else f"(* {render_number(k, sort)} {x})")
    if e.const or not terms:
        terms.append(render_number(e.const, sort))
    return terms[0] if len(terms) == 1 else f"(+ {' '.join(terms)})"


def render_constraint(c: Constraint, name, sort_of) -> str:
    t = c.is_trivial()
    if t is not None:
        return "true" if t else "false"
    lhs = Linear(c.expr.coeffs)
    sort = "Real" if any(sort_of(v) == "Real" for v in lhs.coeffs) else "Int"
    rhs = render_number(-c.expr.const, sort)
    op = "=" if c.kind == EQ else "<="
    return f"({op} {render_linear(lhs, name, sort_of, sort)} {rhs})"


def render_conjunction(cs: Iterable[Constraint], name, sort_of) -> str:
    return _and([render_constraint(c, name, sort_of) for c in cs])


def render_value(disjuncts: Sequence[Sequence[Constraint]], name, sort_of) -> str:
    """A (possibly disjunctive) abstract value; an empty disjunct list is false."""
    return _or([render_conjunction(d, name, sort_of) for d in disjuncts])


@dataclass
class GrowthResult:
    target: int
    path: list[int]
    model: dict


@dataclass
class SectionFormula:
    info: CfgAnalysisInfo
    enabled: Optional[frozenset]  # enabled edges (None = all)
    declarations: list[str] = field(default_factory=list)
    assertions: list[str] = field(default_factory=list)
    node_act: dict[Node, str] = field(default_factory=dict)
    edge_act: dict[tuple[int, int], str] = field(default_factory=dict)
    out: dict[Node, list[tuple[Node, tuple[int, int]]]] = field(default_factory=dict)
    sources: list[int] = field(default_factory=list)
    sink_points: list[int] = field(default_factory=list)  # P_R points with a sink copy
    sorts: dict[str, str] = field(default_factory=dict)  # SMT name -> sort

    @property
    def cfg(self):
        return self.info.cfg

    def var(self, v: str) -> str:
        return quote(v)

    def sink_var(self, q: int, v: str) -> str:
        """SMT name of dimension ``v`` at the sink copy of point ``q``."""
        if q in self.info.analysis_points and v in self._phi_targets(q):
            return quote(v + SINK)
        return quote(v)

    def _phi_targets(self, q):
        return {p.target for p in self.cfg.blocks[q].phis}

    def sort_of_dim(self, v: str) -> str:
        return smt_sort(self.cfg.var_types.get(v, INT))

    def source_formula(self, p: int, disjuncts) -> str:
        return render_value(disjuncts, self.var, self.sort_of_dim)

    def sink_formula(self, q: int, disjuncts) -> str:
        return render_value(disjuncts, lambda v: self.sink_var(q, v), self.sort_of_dim)

    def key(self):
        return (id(self.info), self.enabled)

    def load(self, session: SolverSession):
        """Assert the formula at frame 0 unless it is already there (frames pushed on top
        of it by the caller are kept)."""
        if session.key == self.key():
            return
        while session.depth:
            session.pop()
        session.reset()
        for d in self.declarations:
            session.send(d)
        for a in self.assertions:
            session.assert_(a)
        session.key = self.key()


def encode_section(info: CfgAnalysisInfo, enabled: Optional[Iterable[tuple[int, int]]] = None) -> SectionFormula:
    cfg = info.cfg
    pr = info.analysis_points
    enabled = None if enabled is None else frozenset(enabled)
    f = SectionFormula(info, enabled)
    edges = [e for e in cfg.edges if enabled is None or (e.src, e.dst) in enabled]

    def src_node(b) -> Node:
        return ("src", b) if b in pr else ("blk", b)

    def dst_node(b) -> Node:
        return ("sink", b) if b in pr else ("blk", b)

    nodes: list[Node] = []
    for b in sorted(cfg.blocks):
        if b in pr:
            nodes.append(("src", b))
            if cfg.in_edges(b):
                nodes.append(("sink", b))
                f.sink_points.append(b)
        else:
            nodes.append(("blk", b))
    f.sources = sorted(pr)
    for n in nodes:
        f.node_act[n] = {"src": "s", "sink": "k", "blk": "b"}[n[0]] + str(n[1])
        f.out[n] = []
    inc: dict[Node, list[str]] = {n: [] for n in nodes}
    for e in edges:
        name = f"e{e.src}_{e.dst}"
        f.edge_act[(e.src, e.dst)] = name
        u, w = src_node(e.src), dst_node(e.dst)
        f.out[u].append((w, (e.src, e.dst)))
        inc[w].append(name)

    decl_names = {}

    def declare(name, sort):
        if name not in decl_names:
            decl_names[name] = sort
            f.declarations.append(f"(declare-fun {name} () {sort})")
            f.sorts[name] = sort

    for n in nodes:
        declare(f.node_act[n], "Bool")
    for e in edges:
        declare(f.edge_act[(e.src, e.dst)], "Bool")
    for v, t in sorted(cfg.var_types.items()):
        if "." in v:  # SSA values only
            declare(quote(v), smt_sort(t))
    for q in f.sink_points:
        for p in cfg.blocks[q].phis:
            declare(quote(p.target + SINK), smt_sort(cfg.var_types[p.target]))

    A = f.assertions
    types = cfg.var_types

    def sort_of_var(v):
        return smt_sort(types.get(v, INT))

    # flow
    for n in nodes:
        act = f.node_act[n]
        if n[0] != "src":
            ins = inc[n]
            A.append(f"(= {act} {_or(ins)})")
            for i in range(len(ins)):
                for j in range(i + 1, len(ins)):
                    A.append(f"(not (and {ins[i]} {ins[j]}))")
        outs = [f.edge_act[k] for _, k in f.out[n]]
        terminal = n[0] == "sink" or (n[0] == "blk" and n[1] in (cfg.exit, cfg.fail, cfg.assume_exit))
        if not terminal:
            A.append(f"(=> {act} {_or(outs)})")
            for i in range(len(outs)):
                for j in range(i + 1, len(outs)):
                    A.append(f"(not (and {outs[i]} {outs[j]}))")
    for e in edges:
        u = src_node(e.src)
        g = "true" if e.guard is None else render_cond(e.guard, types)
        A.append(f"(=> {f.edge_act[(e.src, e.dst)]} {_and([f.node_act[u], g])})")

    # definitions
    for n in nodes:
        if n[0] == "sink":
            continue
        act = f.node_act[n]
        for d in cfg.blocks[n[1]].defs:
            rhs = render_def(d.rhs, types, smt_sort(types[d.target]))
            if rhs is not None:
                A.append(f"(=> {act} (= {quote(d.target)} {rhs}))")
    # phis
    for e in edges:
        blk = cfg.blocks[e.dst]
        if not blk.phis:
            continue
        act = f.edge_act[(e.src, e.dst)]
        for p in blk.phis:
            target = quote(p.target + SINK) if e.dst in pr else quote(p.target)
            sort = smt_sort(types[p.target])
            arg = p.args[e.src]
            val = (render_ir(Var(arg), types, sort) if isinstance(arg, str)
                   else render_number(Fraction(arg), sort))
            A.append(f"(=> {act} (= {target} {val}))")
    # values of live linear variables at sources
    def_block = {}
    for b, blk in cfg.blocks.items():
        for d in blk.defs:
            def_block[d.target] = b
    for p in f.sources:
        reach = _reachable_blocks(f, ("src", p))
        act = f.node_act[("src", p)]
        for v in sorted(info.live.get(p, ())):
            exp = info.expansion.get(v)
            if exp is None:
                continue
            if def_block.get(v) in reach:
                continue
            sort = sort_of_var(v)
            A.append(f"(=> {act} (= {quote(v)} {render_linear(exp, quote, sort_of_var, sort)}))")
    return f


def _reachable_blocks(f: SectionFormula, start: Node) -> set[int]:
    seen = {start}
    work = [start]
    while work:
        n = work.pop()
        for w, _ in f.out.get(n, ()):
            if w not in seen:
                seen.add(w)
                work.append(w)
    return {n[1] for n in seen if n[0] != "sink"}


def _expr_type(e, types) -> str:
    if isinstance(e, Const):
        return INT if e.value.denominator == 1 else REAL
    if isinstance(e, Var):
        return types.get(e.name, INT)
    if isinstance(e, (BinOp, Havoc)):
        return e.type
    raise TypeError(e)


def render_ir(e, types, sort: str) -> str:
    """IR expression (linear part only) in the requested sort."""
    if isinstance(e, Const):
        return render_number(e.value, sort)
    if isinstance(e, Var):
        x = quote(e.name)
        if sort == "Real" and types.get(e.name, INT) == INT:
            return f"(to_real {x})"
        return x
    if isinstance(e, BinOp):
        own = smt_sort(e.type)
        if e.op == "/" and own == "Int":
            div = int_division(e)
            n = render_ir(div[0], types, "Int")
            d = abs(div[1])
            q = f"(ite (>= {n} 0) (div {n} {d}) (- (div (- {n}) {d})))"
            if div[1] < 0:
                q = f"(- {q})"
        else:
            q = f"({e.op} {render_ir(e.left, types, own)} {render_ir(e.right, types, own)})"
        if sort == "Real" and own == "Int":
            return f"(to_real {q})"
        return q
    raise TypeError(e)


def render_def(rhs, types, sort: str) -> Optional[str]:
    """Right-hand side of a definition, or None when it is left unconstrained
    (havoc and nonlinear operations)."""
    if isinstance(rhs, Havoc):
        return None
    if isinstance(rhs, BinOp):
        if rhs.op == "/" and rhs.type == INT:
            if int_division(rhs) is None:
                return None
        elif rhs.op in "*/":
            if rhs.op == "*" and const_value(rhs.left) is None and const_value(rhs.right) is None:
                return None
            if rhs.op == "/" and (const_value(rhs.right) in (None, 0)):
                return None
    return render_ir(rhs, types, sort)


def render_cond(c: Cond, types) -> str:
    sort = "Real" if REAL in (_expr_type(c.left, types), _expr_type(c.right, types)) else "Int"
    left, right = render_ir(c.left, types, sort), render_ir(c.right, types, sort)
    if c.op == "!=":
        return f"(not (= {left} {right}))"
    op = "=" if c.op == "==" else c.op
    return f"({op} {left} {right})"


# queries --------------------------------------------------------------------------------


def _select_source(f: SectionFormula, src: int) -> list[str]:
    out = [f.node_act[("src", src)]]
    for p in f.sources:
        if p != src:
            out.append(f"(not {f.node_act[('src', p)]})")
    return out


def model_to_path(f: SectionFormula, model: dict, src: int) -> list[int]:
    """Blocks of the unique source-to-sink path selected by the model."""
    node: Node = ("src", src)
    path = [src]
    for _ in range(len(f.out) + 1):
        nxt = [(w, k) for w, k in f.out[node] if model.get(f.edge_act[k]) is True]
        if not nxt:
            if f.out[node] and node[0] != "sink":
                raise RuntimeError(f"model activates no out-edge of {node}")
            return path
        if len(nxt) > 1:
            raise RuntimeError(f"model activates several out-edges of {node}")
        node = nxt[0][0]
        path.append(node[1])
        if node[0] == "sink":
            return path
    raise RuntimeError("activation cycle in model")


def check_growth(session: SolverSession, f: SectionFormula, src: int, x_src,
                 targets: dict[int, list], extra: Sequence[str] = ()) -> Optional[GrowthResult]:
    """Is there a path from ``src`` (starting in ``x_src``) whose image escapes the value
    of some target? Values are disjunct lists of constraint lists ([] = bottom).

    Targets are analysis points (their sink copies) or non-analysis terminal blocks.
    """
    if not x_src:
        return None
    f.load(session)
    goals = []
    for q, val in sorted(targets.items()):
        if q in f.info.analysis_points:
            node = ("sink", q)
            if node not in f.node_act:
                continue
            phi = f.sink_formula(q, val)
        else:
            node = ("blk", q)
            if node not in f.node_act:
                continue
            phi = f.source_formula(q, val)
        goals.append(_and([f.node_act[node], f"(not {phi})"]))
    if not goals:
        return None
    query = _select_source(f, src) + [f.source_formula(src, x_src), _or(goals)] + list(extra)
    status, model = session.solve(query)
    if status == "unknown":
        raise SolverInconclusive(f"solver returned unknown on a growth query from bb{src}")
    if status == "unsat":
        return None
    path = model_to_path(f, model, src)
    return GrowthResult(path[-1], path, model)


def fail_reachability(session: SolverSession, f: SectionFormula, values: dict[int, list]
                      ) -> dict[int, bool]:
    """For each assert id: can a path from some analysis point (in its value) reach the
    failure block through one of the assert's failing edges?"""
    cfg = f.cfg
    result = {aid: False for aid in cfg.asserts}
    fail_node = ("blk", cfg.fail)
    if fail_node not in f.node_act:
        return result
    f.load(session)
    session.push()
    try:
        srcs = []
        for p in f.sources:
            act = f.node_act[("src", p)]
            val = values.get(p, [])
            if not val:
                session.assert_(f"(not {act})")
                continue
            srcs.append(act)
            session.assert_(f"(=> {act} {f.source_formula(p, val)})")
        if not srcs:
            return result
        session.assert_(_or(srcs))
        for i in range(len(srcs)):
            for j in range(i + 1, len(srcs)):
                session.assert_(f"(not (and {srcs[i]} {srcs[j]}))")
        session.assert_(f.node_act[fail_node])
        while True:
            status, model = session.solve([])
            if status == "unknown":
                raise SolverInconclusive("solver returned unknown on the assertion query")
            if status == "unsat":
                break
            src = next(p for p in f.sources if model.get(f.node_act[("src", p)]) is True)
            path = model_to_path(f, model, src)
            aid = cfg.fail_edges.get((path[-2], path[-1]))
            if aid is None:
                raise RuntimeError("failure path does not end with an assertion edge")
            result[aid] = True
            for (a, b), k in cfg.fail_edges.items():
                if k == aid and (a, b) in f.edge_act:
                    session.assert_(f"(not {f.edge_act[(a, b)]})")
    finally:
        session.pop()
    return result
