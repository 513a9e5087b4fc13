"""Control-flow graphs and lowering from the syntax tree.

Blocks hold phi functions and definitions; edges carry a single comparison guard
(or none). Compound conditions are expanded into chains of branching blocks,
and an equality test becomes the three-way ``< / > / ==`` split.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

from . import ast as A
from .ast import BOOL, INT, REAL, VOID

# IR expressions ---------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: Fraction


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * /
    left: "IRExpr"
    right: "IRExpr"
    type: str  # result type; '/' on int truncates toward zero


@dataclass(frozen=True)
class Havoc:
    type: str
    kind: str = "nondet"  # nondet | param | uninit | call


IRExpr = Union[Const, Var, BinOp, Havoc]
Operand = Union[str, Fraction]  # phi argument: variable name or constant

NEGATE = {"<": ">=", "<=": ">", ">": "<=", ">=": "<", "==": "!="}


@dataclass(frozen=True)
class Cond:
    op: str  # < <= > >= ==
    left: IRExpr
    right: IRExpr

    def negated(self) -> "Cond":
        return Cond(NEGATE[self.op], self.left, self.right)


@dataclass
class Def:
    target: str
    rhs: IRExpr
    line: int = 0


@dataclass
class Phi:
    target: str
    args: dict[int, Operand]  # predecessor block -> incoming value


@dataclass
class Block:
    id: int
    label: str = ""
    line: int = 0
    phis: list[Phi] = field(default_factory=list)
    defs: list[Def] = field(default_factory=list)
    observed: list[str] = field(default_factory=list)  # pseudo-uses at the exit block


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    guard: Optional[Cond] = None


@dataclass
class AssertInfo:
    id: int
    line: int
    col: int
    kind: str = "assert"


@dataclass
class Cfg:
    name: str
    blocks: dict[int, Block]
    edges: list[Edge]
    entry: int
    exit: int
    fail: int
    assume_exit: int
    var_types: dict[str, str]
    var_origin: dict[str, str]  # variable -> source-level name
    var_line: dict[str, int]  # variable -> defining source line
    asserts: dict[int, AssertInfo] = field(default_factory=dict)
    fail_edges: dict[tuple[int, int], int] = field(default_factory=dict)
    params: list[str] = field(default_factory=list)
    nonlinear: bool = False
    diagnostics: list[str] = field(default_factory=list)
    ssa: bool = False

    def __post_init__(self):
        self._index()

    def _index(self):
        self._succ: dict[int, list[Edge]] = {b: [] for b in self.blocks}
        self._pred: dict[int, list[Edge]] = {b: [] for b in self.blocks}
        self._edge: dict[tuple[int, int], Edge] = {}
        for e in self.edges:
            self._succ[e.src].append(e)
            self._pred[e.dst].append(e)
            self._edge[(e.src, e.dst)] = e

    def reindex(self):
        self.edges.sort(key=lambda e: (e.src, e.dst))
        self._index()

    def out_edges(self, b: int) -> list[Edge]:
        return self._succ[b]

    def in_edges(self, b: int) -> list[Edge]:
        return self._pred[b]

    def succs(self, b: int) -> list[int]:
        return [e.dst for e in self._succ[b]]

    def preds(self, b: int) -> list[int]:
        return [e.src for e in self._pred[b]]

    def edge(self, src: int, dst: int) -> Edge:
        return self._edge[(src, dst)]

    def has_edge(self, src: int, dst: int) -> bool:
        return (src, dst) in self._edge

    def copy(self) -> "Cfg":
        return copy.deepcopy(self)

    def definitions(self) -> dict[str, tuple[int, Union[Def, Phi]]]:
        out = {}
        for b in sorted(self.blocks):
            blk = self.blocks[b]
            for p in blk.phis:
                out[p.target] = (b, p)
            for d in blk.defs:
                out[d.target] = (b, d)
        return out

    def source_name(self, var: str) -> str:
        return self.var_origin.get(var, var)

    def block_label(self, b: int) -> str:
        blk = self.blocks.get(b)
        if b == self.entry:
            return "entry"
        if b == self.exit:
            return "exit"
        if blk is None:
            return f"bb{b}"
        return f"{blk.label or 'bb'}{b}" + (f" (line {blk.line})" if blk.line else "")


# expression helpers -------------------------------------------------------------


def expr_vars(e) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, BinOp):
        return expr_vars(e.left) | expr_vars(e.right)
    if isinstance(e, Cond):
        return expr_vars(e.left) | expr_vars(e.right)
    return set()


def rename_expr(e, f):
    if isinstance(e, Var):
        return Var(f(e.name))
    if isinstance(e, BinOp):
        return BinOp(e.op, rename_expr(e.left, f), rename_expr(e.right, f), e.type)
    if isinstance(e, Cond):
        return Cond(e.op, rename_expr(e.left, f), rename_expr(e.right, f))
    return e


def const_value(e) -> Optional[Fraction]:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, BinOp):
        lv, rv = const_value(e.left), const_value(e.right)
        if lv is None or rv is None:
            return None
        return arith(e.op, lv, rv, e.type)
    return None


def arith(op: str, a: Fraction, b: Fraction, typ: str) -> Optional[Fraction]:
    """Concrete arithmetic; None for division by zero."""
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if b == 0:
        return None
    if typ == INT:
        q = abs(a.numerator) // abs(b.numerator)
        return Fraction(q if (a >= 0) == (b > 0) else -q)
    return a / b


def compare(op: str, a: Fraction, b: Fraction) -> bool:
    return {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b, "==": a == b, "!=": a != b}[op]


def is_nonlinear(e: IRExpr) -> bool:
    """Top-level operation that the affine domains cannot express."""
    if isinstance(e, Havoc):
        return True
    if isinstance(e, BinOp):
        if e.op == "*":
            return const_value(e.left) is None and const_value(e.right) is None
        if e.op == "/":
            d = const_value(e.right)
            return d is None or d == 0 or e.type == INT
    return False


# lowering ---------------------------------------------------------------------------


class _Lowerer:
    def __init__(self, func: A.Function, program: A.Program):
        self.func = func
        self.program = program
        self.blocks: dict[int, Block] = {}
        self.edges: list[Edge] = []
        self.var_types = {v: info.type for v, info in func.vars.items()}
        self.var_origin = {v: info.name for v, info in func.vars.items()}
        self.var_line = {v: info.line for v, info in func.vars.items()}
        self.asserts: dict[int, AssertInfo] = {}
        self.fail_edges: dict[tuple[int, int], int] = {}
        self.ntemp = 0
        self.nonlinear = False
        self.entry = self.new_block("entry", func.pos[0])
        self.exit = self.new_block("exit")
        self.fail = self.new_block("fail")
        self.assume_exit = self.new_block("assume_fail")
        self.cur: Optional[int] = self.entry
        self.loops: list[tuple[int, int]] = []  # (continue target, break target)
        self.returns: list[tuple[int, Optional[str]]] = []

    def new_block(self, label="", line=0) -> int:
        b = len(self.blocks)
        self.blocks[b] = Block(b, label, line)
        return b

    def here(self, line=0) -> int:
        if self.cur is None:  # dead code after a jump
            self.cur = self.new_block("dead", line)
        return self.cur

    def emit(self, target, rhs, line):
        self.blocks[self.here(line)].defs.append(Def(target, rhs, line))

    def goto(self, dst):
        if self.cur is not None:
            self.edges.append(Edge(self.cur, dst))
        self.cur = None

    def temp(self, typ, rhs, line) -> Var:
        self.ntemp += 1
        name = f"__t{self.ntemp}"
        self.var_types[name] = typ
        self.var_origin[name] = name
        self.var_line[name] = line
        self.emit(name, rhs, line)
        if not isinstance(rhs, Havoc):
            self.nonlinear = True
        return Var(name)

    def run(self) -> Cfg:
        f = self.func
        for v, info in f.vars.items():
            self.emit(v, Havoc(info.type, "param" if info.is_param else "uninit"), info.line)
        if f.ret_type != VOID:
            self.var_types["__ret"] = f.ret_type
            self.var_origin["__ret"] = "__ret"
            self.var_line["__ret"] = f.pos[0]
            self.emit("__ret", Havoc(f.ret_type, "uninit"), f.pos[0])
        self.returns.append((self.exit, "__ret" if f.ret_type != VOID else None))
        self.stmt(f.body)
        self.goto(self.exit)
        observed = list(f.vars)
        if f.ret_type != VOID:
            observed.append("__ret")
        self.blocks[self.exit].observed = observed
        cfg = Cfg(f.name, self.blocks, self.edges, self.entry, self.exit, self.fail,
                  self.assume_exit, self.var_types, self.var_origin, self.var_line,
                  self.asserts, self.fail_edges, [v for _, v in f.params], self.nonlinear)
        prune_unreachable(cfg)
        return cfg

    # statements
    def stmt(self, s: A.Stmt):
        line = s.pos[0]
        if isinstance(s, A.Block):
            for x in s.body:
                self.stmt(x)
        elif isinstance(s, A.Decl):
            rhs = self.expr(s.init, line) if s.init is not None else Havoc(s.vtype, "uninit")
            self.emit(s.name, rhs, line)
        elif isinstance(s, A.Assign):
            self.emit(s.name, self.expr(s.value, line), line)
        elif isinstance(s, A.If):
            then_b = self.new_block("then", line)
            join = self.new_block("endif", line)
            else_b = self.new_block("else", line) if s.orelse is not None else join
            self.branch(s.cond, then_b, else_b, line)
            self.cur = then_b
            self.stmt(s.then)
            self.goto(join)
            if s.orelse is not None:
                self.cur = else_b
                self.stmt(s.orelse)
                self.goto(join)
            self.cur = join
        elif isinstance(s, A.While):
            head = self.new_block("loop", line)
            body = self.new_block("body", line)
            after = self.new_block("endloop", line)
            self.goto(head)
            self.cur = head
            self.branch(s.cond, body, after, line)
            self.loops.append((head, after))
            self.cur = body
            self.stmt(s.body)
            self.goto(head)
            self.loops.pop()
            self.cur = after
        elif isinstance(s, A.For):
            if s.init is not None:
                self.stmt(s.init)
            head = self.new_block("loop", line)
            body = self.new_block("body", line)
            step = self.new_block("step", line)
            after = self.new_block("endloop", line)
            self.goto(head)
            self.cur = head
            if s.cond is None:
                self.goto(body)
            else:
                self.branch(s.cond, body, after, line)
            self.loops.append((step, after))
            self.cur = body
            self.stmt(s.body)
            self.goto(step)
            self.loops.pop()
            self.cur = step
            if s.step is not None:
                self.stmt(s.step)
            self.goto(head)
            self.cur = after
        elif isinstance(s, A.Break):
            self.here(line)
            self.goto(self.loops[-1][1])
        elif isinstance(s, A.Continue):
            self.here(line)
            self.goto(self.loops[-1][0])
        elif isinstance(s, A.Return):
            target, var = self.returns[-1]
            if s.value is not None and var is not None:
                self.emit(var, self.expr(s.value, line), line)
            self.here(line)
            self.goto(target)
        elif isinstance(s, A.Assert):
            aid = len(self.asserts)
            self.asserts[aid] = AssertInfo(aid, line, s.pos[1])
            before = len(self.edges)
            cont = self.new_block("cont", line)
            self.branch(s.cond, cont, self.fail, line)
            for e in self.edges[before:]:
                if e.dst == self.fail:
                    self.fail_edges[(e.src, e.dst)] = aid
            self.cur = cont
        elif isinstance(s, A.Assume):
            cont = self.new_block("cont", line)
            self.branch(s.cond, cont, self.assume_exit, line)
            self.cur = cont
        elif isinstance(s, A.ExprStmt):
            self.call(s.expr, line)
        elif isinstance(s, A.Inlined):
            end = self.new_block("ret_" + s.callee, line)
            self.returns.append((end, s.result))
            self.stmt(s.body)
            self.goto(end)
            self.returns.pop()
            self.cur = end
        else:  # pragma: no cover
            raise TypeError(s)

    # conditions
    def branch(self, e: A.Expr, t: int, f: int, line: int):
        if isinstance(e, A.BoolLit):
            self.here(line)
            self.goto(t if e.value else f)
        elif isinstance(e, A.Unary) and e.op == "!":
            self.branch(e.operand, f, t, line)
        elif isinstance(e, A.Binary) and e.op == "&&":
            mid = self.new_block("and", line)
            self.branch(e.left, mid, f, line)
            self.cur = mid
            self.branch(e.right, t, f, line)
        elif isinstance(e, A.Binary) and e.op == "||":
            mid = self.new_block("or", line)
            self.branch(e.left, t, mid, line)
            self.cur = mid
            self.branch(e.right, t, f, line)
        elif isinstance(e, A.Binary):
            left = self.expr(e.left, line)
            right = self.expr(e.right, line)
            src = self.here(line)
            lv, rv = const_value(left), const_value(right)
            if lv is not None and rv is not None:
                self.goto(t if compare(e.op, lv, rv) else f)
                return
            if t == f:
                self.goto(t)
                return
            self.cur = None
            if e.op in ("==", "!="):
                yes, no = (t, f) if e.op == "==" else (f, t)
                lt = self.new_block("lt", line)
                gt = self.new_block("gt", line)
                self.edges.append(Edge(src, lt, Cond("<", left, right)))
                self.edges.append(Edge(src, gt, Cond(">", left, right)))
                self.edges.append(Edge(src, yes, Cond("==", left, right)))
                self.edges.append(Edge(lt, no))
                self.edges.append(Edge(gt, no))
            else:
                c = Cond(e.op, left, right)
                self.edges.append(Edge(src, t, c))
                self.edges.append(Edge(src, f, c.negated()))
        else:
            raise TypeError(f"not a condition: {e}")

    # expressions
    def call(self, e: A.Call, line: int) -> IRExpr:
        if e.func == "nondet_int":
            return self.temp(INT, Havoc(INT), line)
        if e.func == "nondet_real":
            return self.temp(REAL, Havoc(REAL), line)
        for a in e.args:  # keep nondeterministic choices inside arguments
            self.expr(a, line)
        if e.type in (INT, REAL):
            return self.temp(e.type, Havoc(e.type, "call"), line)
        return Const(Fraction(0))

    def expr(self, e: A.Expr, line: int) -> IRExpr:
        if isinstance(e, A.Num):
            return Const(e.value)
        if isinstance(e, A.Name):
            return Var(e.name)
        if isinstance(e, A.Call):
            return self.call(e, line)
        if isinstance(e, A.Unary) and e.op == "-":
            x = self.expr(e.operand, line)
            v = const_value(x)
            return Const(-v) if v is not None else BinOp("-", Const(Fraction(0)), x, e.type)
        if isinstance(e, A.Binary) and e.op in "+-*/":
            left, right = self.expr(e.left, line), self.expr(e.right, line)
            node = BinOp(e.op, left, right, e.type)
            v = const_value(node)
            if v is not None:
                return Const(v)
            if is_nonlinear(node):
                return self.temp(e.type, node, line)
            return node
        raise TypeError(f"not an arithmetic expression: {e}")


def prune_unreachable(cfg: Cfg):
    seen = {cfg.entry}
    stack = [cfg.entry]
    succ: dict[int, list[int]] = {}
    for e in cfg.edges:
        succ.setdefault(e.src, []).append(e.dst)
    while stack:
        b = stack.pop()
        for s in succ.get(b, ()):
            if s not in seen:
                seen.add(s)
                stack.append(s)
    cfg.blocks = {b: blk for b, blk in cfg.blocks.items() if b in seen}
    cfg.edges = [e for e in cfg.edges if e.src in seen and e.dst in seen]
    cfg.fail_edges = {k: v for k, v in cfg.fail_edges.items() if k[0] in seen and k[1] in seen}
    for blk in cfg.blocks.values():
        for p in blk.phis:
            p.args = {k: v for k, v in p.args.items() if k in seen}
    cfg.reindex()


def lower_to_cfg(program: A.Program) -> dict[str, Cfg]:
    """One control-flow graph per function."""
    return {f.name: _Lowerer(f, program).run() for f in program.functions}
