"""Analysis points, dimension selection and parallel-assignment transfer functions.

Abstract values live at block entries, *after* the block's phi functions. A path
from block ``a`` to block ``b`` executes the definitions of every block except the
last, checks the guards of its edges, and evaluates the phis of each block entered.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .frontend.ast import INT
from .frontend.cfg import BinOp, Cfg, Cond, Const, Havoc, Var, const_value, expr_vars
from .frontend.passes import retreating_edges
from .linear import BOTTOM_CONSTRAINT, EQ, LE, Constraint, Linear

# cut points and ordering ---------------------------------------------------------------


def compute_widening_points(cfg: Cfg) -> set[int]:
    """Targets of the retreating edges of a depth-first search from entry."""
    return {h for _, h in retreating_edges(cfg)}


def is_acyclic_without(cfg: Cfg, removed: set[int]) -> bool:
    """Cycle detection on the graph with ``removed`` blocks deleted."""
    indeg = {b: 0 for b in cfg.blocks if b not in removed}
    for e in cfg.edges:
        if e.src in indeg and e.dst in indeg:
            indeg[e.dst] += 1
    ready = [b for b, d in indeg.items() if d == 0]
    seen = 0
    while ready:
        b = ready.pop()
        seen += 1
        for s in cfg.succs(b):
            if s in indeg:
                indeg[s] -= 1
                if indeg[s] == 0:
                    ready.append(s)
    return seen == len(indeg)


def scc_topo_order(cfg: Cfg) -> list[list[int]]:
    """Tarjan's algorithm (iterative); components returned in topological order."""
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    out: list[list[int]] = []
    counter = itertools.count()
    for root in sorted(cfg.blocks):
        if root in index:
            continue
        work = [(root, iter(sorted(cfg.succs(root))))]
        index[root] = low[root] = next(counter)
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            w = next(it, None)
            if w is not None:
                if w not in index:
                    index[w] = low[w] = next(counter)
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(sorted(cfg.succs(w)))))
                elif w in on_stack:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                out.append(sorted(comp))
    return out[::-1]


# linearization ------------------------------------------------------------------------------


def linear_form(e, lookup) -> Optional[Linear]:
    """Affine form of an IR expression, or None if it is not affine.

    ``lookup(name)`` gives the form to substitute for a variable.
    """
    if isinstance(e, Const):
        return Linear.constant(e.value)
    if isinstance(e, Var):
        return lookup(e.name)
    if isinstance(e, Havoc):
        return None
    if isinstance(e, BinOp):
        if e.op in "+-":
            left, right = linear_form(e.left, lookup), linear_form(e.right, lookup)
            if left is None or right is None:
                return None
            return left + right if e.op == "+" else left - right
        if e.op == "*":
            k = const_value(e.left)
            other = e.right
            if k is None:
                k, other = const_value(e.right), e.left
            if k is None:
                return None
            inner = linear_form(other, lookup)
            return None if inner is None else inner.scale(k)
        if e.op == "/":
            d = const_value(e.right)
            if d is None or d == 0 or e.type == INT:
                return None
            inner = linear_form(e.left, lookup)
            return None if inner is None else inner.scale(1 / d)
    raise TypeError(e)


def int_division(e) -> Optional[tuple[object, Fraction]]:
    """(numerator, constant divisor) for integer division by a nonzero constant."""
    if isinstance(e, BinOp) and e.op == "/" and e.type == INT:
        d = const_value(e.right)
        if d is not None and d != 0:
            return e.left, d
    return None


def guard_constraint(c: Cond, lookup, is_int) -> Constraint:
    left, right = linear_form(c.left, lookup), linear_form(c.right, lookup)
    if left is None or right is None:  # lowering hoists nonlinear operands; be safe anyway
        return None
    diff = left - right
    if c.op == "==":
        return Constraint(diff, EQ)
    if c.op in (">", ">="):
        diff = -diff
    if c.op in ("<", ">"):
        integral = (diff.const.denominator == 1
                     and all(k.denominator == 1 and is_int(v) for v, k in diff.coeffs.items()))
        if integral:
            return Constraint(diff + 1, LE)  # strict over the integers: d <= -1
        return Constraint(diff, LE)  # relaxed over the rationals
    return Constraint(diff, LE)


# live by linearity ----------------------------------------------------------------------------


def linear_definitions(cfg: Cfg) -> dict[str, Linear]:
    """Variables defined by an affine expression of other variables (not phis, not havoc)."""
    out = {}
    for blk in cfg.blocks.values():
        for d in blk.defs:
            f = linear_form(d.rhs, Linear.var)
            if f is not None:
                out[d.target] = f
    return out


def expansions(cfg: Cfg, lin: dict[str, Linear]) -> dict[str, Linear]:
    """Each linearly defined variable as an affine form over non-linear variables."""
    memo: dict[str, Linear] = {}

    def expand(v):
        if v not in lin:
            return Linear.var(v)
        if v not in memo:
            memo[v] = lin[v].substitute({u: expand(u) for u in lin[v].vars()})
        return memo[v]

    for v in lin:
        expand(v)
    return memo


def ssa_liveness(cfg: Cfg) -> dict[int, set[str]]:
    """Variables live at each block entry after its phis (SSA form)."""
    uses: dict[int, set[str]] = {}
    defs: dict[int, set[str]] = {}
    for b, blk in cfg.blocks.items():
        u, d = set(), set()
        for x in blk.defs:
            u |= _vars(x.rhs) - d
            d.add(x.target)
        for e in cfg.out_edges(b):
            if e.guard is not None:
                u |= _vars(e.guard) - d
        u |= set(blk.observed) - d
        uses[b], defs[b] = u, d
    live = {b: set() for b in cfg.blocks}
    changed = True
    order = sorted(cfg.blocks, reverse=True)
    while changed:
        changed = False
        for b in order:
            out = set()
            for s in cfg.succs(b):
                sblk = cfg.blocks[s]
                out |= live[s] - {p.target for p in sblk.phis}
                for p in sblk.phis:
                    arg = p.args.get(b)
                    if isinstance(arg, str):
                        out.add(arg)
            new = uses[b] | (out - defs[b])
            if new != live[b]:
                live[b] = new
                changed = True
    return live


def _vars(e) -> set[str]:
    return expr_vars(e)


def live_by_linearity(cfg: Cfg, live=None, lin=None) -> dict[int, list[str]]:
    """Dimensions at each block: variables live by linearity that are not linearly defined.

    Closes ordinary liveness under "appears in the affine definition of a variable that
    is live by linearity".
    """
    live = ssa_liveness(cfg) if live is None else live
    lin = linear_definitions(cfg) if lin is None else lin
    out = {}
    for b, vs in live.items():
        lbl = set(vs)
        work = [v for v in vs if v in lin]
        while work:
            v = work.pop()
            for u in lin[v].vars():
                if u not in lbl:
                    lbl.add(u)
                    if u in lin:
                        work.append(u)
        out[b] = sorted(v for v in lbl if v not in lin)
    return out


# parallel assignments -----------------------------------------------------------------------


@dataclass
class ParallelAssign:
    """Simultaneous ``targets := exprs`` over ``src`` and fresh havoc symbols.

    The transfer adds the fresh symbols to the source dimensions, meets ``guards``,
    maps each target to its affine expression (``None`` = unconstrained) and keeps only
    the targets.
    """
    src: list[str]
    targets: list[str]
    exprs: list[Optional[Linear]]
    guards: list[Constraint] = field(default_factory=list)
    fresh: list[str] = field(default_factory=list)
    types: dict[str, str] = field(default_factory=dict)  # types of src, fresh and targets

    def infeasible(self) -> bool:
        return any(g.is_trivial() is False for g in self.guards)

    def apply(self, env) -> Optional[dict]:
        """Concrete semantics for a point; None if a guard fails. Fresh values must be in env."""
        if not all(g.holds(env) for g in self.guards):
            return None
        return {t: (e.evaluate(env) if e is not None else None)
                for t, e in zip(self.targets, self.exprs)}

    def is_identity(self) -> bool:
        return (self.src == self.targets and not self.guards and not self.fresh
                and all(e == Linear.var(t) for t, e in zip(self.targets, self.exprs)))


class _Composer:
    def __init__(self, info: "CfgAnalysisInfo", src_dims):
        self.info = info
        self.cfg = info.cfg
        self.env: dict[str, Linear] = {v: Linear.var(v) for v in src_dims}
        self.fresh: list[str] = []
        self.types: dict[str, str] = {v: self.cfg.var_types.get(v, INT) for v in src_dims}
        self.guards: list[Constraint] = []
        self.counter = itertools.count(1)

    def lookup(self, v: str) -> Linear:
        f = self.env.get(v)
        if f is None:
            exp = self.info.expansion.get(v)
            if exp is None:
                raise KeyError(f"{v} is neither a dimension nor linearly defined here")
            f = exp.substitute({u: self.lookup(u) for u in exp.vars()})
            self.env[v] = f
        return f

    def new_symbol(self, typ: str) -> Linear:
        name = f"#h{next(self.counter)}"
        self.fresh.append(name)
        self.types[name] = typ
        return Linear.var(name)

    def is_int(self, v: str) -> bool:
        return self.types.get(v, INT) == INT

    def block_defs(self, b: int):
        for d in self.cfg.blocks[b].defs:
            f = linear_form(d.rhs, self.lookup)
            typ = self.cfg.var_types.get(d.target, INT)
            if f is None:
                f = self.new_symbol(typ)
                div = int_division(d.rhs)
                if div is not None:
                    num = linear_form(div[0], self.lookup)
                    if num is not None:
                        d_abs = abs(div[1])
                        r = num - f.scale(div[1])  # remainder, |r| <= |d| - 1
                        self.guards.append(Constraint(r - (d_abs - 1), LE))
                        self.guards.append(Constraint(-r - (d_abs - 1), LE))
            self.env[d.target] = f

    def edge(self, src: int, dst: int):
        e = self.cfg.edge(src, dst)
        if e.guard is not None:
            g = guard_constraint(e.guard, self.lookup, self.is_int)
            if g is not None and g.is_trivial() is not True:
                self.guards.append(g)
        phis = self.cfg.blocks[dst].phis
        vals = {}
        for p in phis:
            arg = p.args[src]
            vals[p.target] = self.lookup(arg) if isinstance(arg, str) else Linear.constant(arg)
        self.env.update(vals)

    def result(self, dst_dims) -> ParallelAssign:
        exprs = [self.lookup(v) for v in dst_dims]
        for v in dst_dims:
            self.types.setdefault(v, self.cfg.var_types.get(v, INT))
        guards = []
        for g in self.guards:
            t = g.is_trivial()
            if t is False:
                guards = [BOTTOM_CONSTRAINT]
                break
            if t is None:
                guards.append(g)
        # a fresh symbol used once, as a whole target expression, is a plain havoc
        used: dict[str, int] = {}
        for f in exprs + [g.expr for g in guards]:
            for v in f.vars():
                used[v] = used.get(v, 0) + 1
        for i, f in enumerate(exprs):
            if len(f.coeffs) == 1 and not f.const:
                (s, k), = f.coeffs.items()
                if s.startswith("#") and k == 1 and used[s] == 1:
                    exprs[i] = None
        live = set()
        for f in [e for e in exprs if e is not None] + [g.expr for g in guards]:
            live |= f.vars()
        fresh = [s for s in self.fresh if s in live]
        return ParallelAssign([], list(dst_dims), exprs, guards, fresh, self.types)


def block_transfer(info: "CfgAnalysisInfo", path: Sequence[int], dims_in=None,
                   dims_out=None) -> ParallelAssign:
    """Compose the path ``path[0] -> ... -> path[-1]`` into one parallel assignment.

    ``path`` is a block sequence; a single block is the identity on its dimensions.
    """
    dims_in = list(info.dims[path[0]] if dims_in is None else dims_in)
    dims_out = list(info.dims[path[-1]] if dims_out is None else dims_out)
    comp = _Composer(info, dims_in)
    for a, b in zip(path, path[1:]):
        comp.block_defs(a)
        comp.edge(a, b)
    pa = comp.result(dims_out)
    pa.src = dims_in
    return pa


# analysis info ---------------------------------------------------------------------------------


@dataclass
class CfgAnalysisInfo:
    cfg: Cfg
    widening_points: set[int]
    analysis_points: set[int]
    scc_order: list[list[int]]
    dims: dict[int, list[str]]
    live: dict[int, set[str]]
    linear: dict[str, Linear]  # direct affine definitions
    expansion: dict[str, Linear]  # affine definitions over non-linear variables
    scc_index: dict[int, int] = field(default_factory=dict)

    @property
    def report_points(self) -> list[int]:
        pts = set(self.analysis_points)
        if self.cfg.exit in self.cfg.blocks:
            pts.add(self.cfg.exit)
        return sorted(pts)

    def transfer(self, path: Sequence[int]) -> ParallelAssign:
        return block_transfer(self, path)

    def view_exprs(self, b: int) -> dict[str, Linear]:
        """Live linearly-defined variables at ``b`` as affine forms over ``dims[b]``."""
        out = {}
        for v in sorted(self.live.get(b, ())):
            if v in self.expansion:
                out[v] = self.expansion[v]
        return out


def analyze_cfg(cfg: Cfg) -> CfgAnalysisInfo:
    if not cfg.ssa:
        raise ValueError("analysis requires SSA form")
    pw = compute_widening_points(cfg)
    pr = pw | {cfg.entry}
    order = scc_topo_order(cfg)
    live = ssa_liveness(cfg)
    lin = linear_definitions(cfg)
    dims = live_by_linearity(cfg, live, lin)
    info = CfgAnalysisInfo(cfg, pw, pr, order, dims, live, lin, expansions(cfg, lin))
    info.scc_index = {b: i for i, comp in enumerate(order) for b in comp}
    return info


# text dump ---------------------------------------------------------------------------------


def _fmt_expr(e) -> str:
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Havoc):
        return f"havoc<{e.type}>"
    if isinstance(e, BinOp):
        return f"({_fmt_expr(e.left)} {e.op} {_fmt_expr(e.right)})"
    if isinstance(e, Cond):
        return f"{_fmt_expr(e.left)} {e.op} {_fmt_expr(e.right)}"
    return str(e)


def dump_cfg(info: CfgAnalysisInfo) -> str:
    """One stanza per block::

        block <id> [<label>] line <n> [P_W] [P_R] scc <k>
          dims: <v> ...
          phi <v> = [<pred>: <operand>, ...]
          def <v> = <expr>
          edge -> <dst> [if <guard>]
    """
    cfg = info.cfg
    lines = [f"function {cfg.name} entry {cfg.entry} exit {cfg.exit}"]
    for b in sorted(cfg.blocks):
        blk = cfg.blocks[b]
        tags = []
        if b in info.widening_points:
            tags.append("P_W")
        if b in info.analysis_points:
            tags.append("P_R")
        role = {cfg.entry: "entry", cfg.exit: "exit", cfg.fail: "fail",
                cfg.assume_exit: "assume_exit"}.get(b, blk.label or "bb")
        lines.append(f"block {b} [{role}] line {blk.line} {' '.join(tags)} scc {info.scc_index[b]}".replace("  ", " "))
        lines.append("  dims: " + " ".join(info.dims[b]))
        for p in blk.phis:
            args = ", ".join(f"{k}: {v}" for k, v in sorted(p.args.items()))
            lines.append(f"  phi {p.target} = [{args}]")
        for d in blk.defs:
            lines.append(f"  def {d.target} = {_fmt_expr(d.rhs)}")
        for e in cfg.out_edges(b):
            g = f" if {_fmt_expr(e.guard)}" if e.guard is not None else ""
            lines.append(f"  edge -> {e.dst}{g}")
    return "\n".join(lines) + "\n"


__all__ = [
    "CfgAnalysisInfo", "ParallelAssign", "analyze_cfg", "block_transfer", "compute_widening_points",
    "dump_cfg", "guard_constraint", "is_acyclic_without", "linear_form", "live_by_linearity",
    "scc_topo_order",
]
