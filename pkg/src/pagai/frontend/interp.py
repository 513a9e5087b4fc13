"""Concrete semantics: a reference interpreter for the syntax tree and a simulator for
control-flow graphs (pre- or post-SSA). Both use exact rationals and unbounded integers.

Nondeterminism is resolved by a ``Chooser``: a callable ``(kind, type, name) -> Fraction``
where kind is one of ``nondet``, ``param``, ``uninit`` and ``call``.
"""

from __future__ import annotations

import operator
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from . import ast as A
from .cfg import BinOp, Cfg, Const, Havoc, Var, arith, compare

Chooser = Callable[[str, str, str], Fraction]


class StepLimit(Exception):
    pass


class RuntimeFault(Exception):
    """Division by zero during concrete execution."""


@dataclass
class Outcome:
    kind: str  # exit | fail | assume | cap | fault
    values: dict[str, Fraction] = field(default_factory=dict)
    assert_line: Optional[int] = None


def random_chooser(rng: random.Random, lo=-1000, hi=1000) -> Chooser:
    def choose(kind, typ, name):
        if typ == A.REAL and rng.random() < 0.5:
            return Fraction(rng.randint(lo * 4, hi * 4), 4)
        return Fraction(rng.randint(lo, hi))
    return choose


def stream_chooser(params: dict[str, Fraction], stream, uninit=Fraction(0)) -> Chooser:
    """Parameters by name, ``nondet_*`` results from ``stream`` in order, zero otherwise."""
    it = iter(stream)

    def choose(kind, typ, name):
        if kind == "param":
            return Fraction(params.get(name, 0))
        if kind == "nondet":
            return Fraction(next(it, 0))
        return uninit
    return choose


# syntax-tree interpreter ----------------------------------------------------------------


class _Return(Exception):
    def __init__(self, value):
        self.value = value


class _Break(Exception):
    pass


class _Continue(Exception):
    pass


class _Stop(Exception):
    def __init__(self, outcome: Outcome):
        self.outcome = outcome


class Interpreter:
    """Executes ``main`` directly from the syntax tree (calls are real calls)."""

    def __init__(self, program: A.Program, choose: Chooser, max_steps=100_000):
        self.program = program
        self.choose = choose
        self.steps = 0
        self.max_steps = max_steps

    def run(self) -> Outcome:
        f = self.program.main
        env = {}
        for v, info in f.vars.items():
            env[v] = self.choose("param" if info.is_param else "uninit", info.type, v)
        try:
            ret = self.body(f, env)
        except _Stop as s:
            return s.outcome
        except StepLimit:
            return Outcome("cap")
        except RuntimeFault:
            return Outcome("fault")
        values = dict(env)
        if ret is not None:
            values["__ret"] = ret
        return Outcome("exit", values)

    def body(self, f: A.Function, env):
        try:
            self.stmt(f.body, env)
        except _Return as r:
            return r.value
        return None

    def tick(self):
        self.steps += 1
        if self.steps > self.max_steps:
            raise StepLimit()

    def stmt(self, s, env):
        self.tick()
        if isinstance(s, A.Block):
            for x in s.body:
                self.stmt(x, env)
        elif isinstance(s, A.Decl):
            env[s.name] = (self.value(s.init, env, s.vtype) if s.init is not None
                           else self.choose("uninit", s.vtype, s.name))
        elif isinstance(s, A.Assign):
            env[s.name] = self.value(s.value, env, None)
        elif isinstance(s, A.If):
            if self.cond(s.cond, env):
                self.stmt(s.then, env)
            elif s.orelse is not None:
                self.stmt(s.orelse, env)
        elif isinstance(s, (A.While, A.For)):
            if isinstance(s, A.For) and s.init is not None:
                self.stmt(s.init, env)
            while s.cond is None or self.cond(s.cond, env):
                self.tick()
                try:
                    self.stmt(s.body, env)
                except _Break:
                    break
                except _Continue:
                    pass
                if isinstance(s, A.For) and s.step is not None:
                    self.stmt(s.step, env)
        elif isinstance(s, A.Break):
            raise _Break()
        elif isinstance(s, A.Continue):
            raise _Continue()
        elif isinstance(s, A.Return):
            raise _Return(self.value(s.value, env, None) if s.value is not None else None)
        elif isinstance(s, A.Assert):
            if not self.cond(s.cond, env):
                raise _Stop(Outcome("fail", dict(env), s.pos[0]))
        elif isinstance(s, A.Assume):
            if not self.cond(s.cond, env):
                raise _Stop(Outcome("assume", dict(env)))
        elif isinstance(s, A.ExprStmt):
            self.expr(s.expr, env)
        elif isinstance(s, A.Inlined):
            try:
                self.stmt(s.body, env)
            except _Return as r:
                if s.result is not None and r.value is not None:
                    env[s.result] = r.value
        else:  # pragma: no cover
            raise TypeError(s)

    def value(self, e, env, _typ):
        return self.expr(e, env)

    def cond(self, e, env) -> bool:
        return bool(self.expr(e, env))

    def expr(self, e, env):
        if isinstance(e, A.Num):
            return e.value
        if isinstance(e, A.BoolLit):
            return e.value
        if isinstance(e, A.Name):
            return env[e.name]
        if isinstance(e, A.Unary):
            v = self.expr(e.operand, env)
            return (not v) if e.op == "!" else -v
        if isinstance(e, A.Binary):
            if e.op == "&&":
                return bool(self.expr(e.left, env)) and bool(self.expr(e.right, env))
            if e.op == "||":
                return bool(self.expr(e.left, env)) or bool(self.expr(e.right, env))
            a, b = self.expr(e.left, env), self.expr(e.right, env)
            if e.op in ("<", "<=", ">", ">=", "==", "!="):
                return compare(e.op, a, b)
            r = arith(e.op, a, b, e.type)
            if r is None:
                raise RuntimeFault()
            return r
        if isinstance(e, A.Call):
            if e.func in ("nondet_int", "nondet_real"):
                return self.choose("nondet", A.INT if e.func == "nondet_int" else A.REAL, e.func)
            callee = self.program.function(e.func)
            args = [self.expr(a, env) for a in e.args]
            local = {}
            for v, info in callee.vars.items():
                if not info.is_param:
                    local[v] = self.choose("uninit", info.type, v)
            for (_, p), a in zip(callee.params, args):
                local[p] = a
            r = self.body(callee, local)
            return r if r is not None else Fraction(0)
        raise TypeError(e)


def run_program(program: A.Program, choose: Chooser, max_steps=100_000) -> Outcome:
    return Interpreter(program, choose, max_steps).run()


# control-flow graph simulator -------------------------------------------------------------


def eval_ir(e, env, choose: Chooser, target: str, typ: str):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Havoc):
        return choose(e.kind, e.type, target)
    if isinstance(e, BinOp):
        r = arith(e.op, eval_ir(e.left, env, choose, target, typ),
                  eval_ir(e.right, env, choose, target, typ), e.type)
        if r is None:
            raise RuntimeFault()
        return r
    raise TypeError(e)


@dataclass
class Trace:
    outcome: Outcome
    visits: list[tuple[int, dict[str, Fraction]]]  # (block, env after phis) at observed blocks
    blocks: list[int]


_CMP = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge,
        "==": operator.eq, "!=": operator.ne}


def _num(v: Fraction, typ: str):
    """Integer-typed values are kept as Python ints (much faster than Fractions)."""
    if typ == A.INT and v.denominator == 1:
        return v.numerator
    return v


def _int_div(a, b):
    if b == 0:
        raise RuntimeFault()
    if isinstance(a, int) and isinstance(b, int):
        q = abs(a) // abs(b)
        return q if (a >= 0) == (b > 0) else -q
    return int(arith("/", Fraction(a), Fraction(b), A.INT))


def _real_div(a, b):
    if b == 0:
        raise RuntimeFault()
    return Fraction(a) / b


def _compile_expr(e, choose_ref, target: str):
    if isinstance(e, Const):
        v = _num(e.value, A.INT if e.value.denominator == 1 else A.REAL)
        return lambda env: v
    if isinstance(e, Var):
        name = e.name
        return lambda env: env[name]
    if isinstance(e, Havoc):
        kind, typ = e.kind, e.type
        return lambda env: _num(Fraction(choose_ref[0](kind, typ, target)), typ)
    if isinstance(e, BinOp):
        l = _compile_expr(e.left, choose_ref, target)
        r = _compile_expr(e.right, choose_ref, target)
        if e.op == "+":
            return lambda env: l(env) + r(env)
        if e.op == "-":
            return lambda env: l(env) - r(env)
        if e.op == "*":
            return lambda env: l(env) * r(env)
        if e.type == A.INT:
            return lambda env: _int_div(l(env), r(env))
        return lambda env: _real_div(l(env), r(env))
    raise TypeError(e)


class _Compiled:
    def __init__(self, cfg: Cfg):
        self.choose = [None]
        self.blocks = {}
        for b, blk in cfg.blocks.items():
            phis = []
            for p in blk.phis:
                args = {}
                for pred, a in p.args.items():
                    if isinstance(a, str):
                        args[pred] = (True, a)
                    else:
                        args[pred] = (False, _num(Fraction(a), cfg.var_types.get(p.target, A.INT)))
                phis.append((p.target, args))
            defs = []
            for d in blk.defs:
                name = d.target.rsplit(".", 1)[0] if cfg.ssa else d.target
                defs.append((d.target, _compile_expr(d.rhs, self.choose, name)))
            outs = []
            for e in cfg.out_edges(b):
                if e.guard is None:
                    outs.append((e.dst, None))
                else:
                    g = e.guard
                    outs.append((e.dst, (_CMP[g.op], _compile_expr(g.left, self.choose, ""),
                                         _compile_expr(g.right, self.choose, ""))))
            self.blocks[b] = (phis, defs, outs)


_COMPILED: dict[int, tuple[Cfg, _Compiled]] = {}


def _compiled(cfg: Cfg) -> _Compiled:
    hit = _COMPILED.get(id(cfg))
    if hit is None or hit[0] is not cfg:
        hit = (cfg, _Compiled(cfg))
        _COMPILED[id(cfg)] = hit
    return hit[1]


def simulate(cfg: Cfg, choose: Chooser, max_steps=100_000, observe=(), on_visit=None,
             keep_path=True) -> Trace:
    """Run the graph from entry. ``observe`` lists blocks whose entry states are recorded
    (after their phis), or passed to ``on_visit(block, env)`` when given. Havoc uses
    ``choose``; parameters are looked up by base name. Integer values come back as ints."""
    code = _compiled(cfg)
    code.choose[0] = choose
    observe = set(observe)
    env: dict = {}
    visits = []
    path = []
    b, prev = cfg.entry, None
    steps = 0
    outcome = None
    exit_b, fail_b, assume_b = cfg.exit, cfg.fail, cfg.assume_exit
    while outcome is None:
        steps += 1
        if steps > max_steps:
            outcome = Outcome("cap")
            break
        if keep_path:
            path.append(b)
        phis, defs, outs = code.blocks[b]
        if phis:
            vals = {}
            for target, args in phis:
                is_var, a = args[prev]
                vals[target] = env[a] if is_var else a
            env.update(vals)
        if b in observe:
            if on_visit is not None:
                on_visit(b, env)
            else:
                visits.append((b, dict(env)))
        try:
            for target, fn in defs:
                env[target] = fn(env)
        except RuntimeFault:
            outcome = Outcome("fault")
            break
        if b == exit_b:
            outcome = Outcome("exit", {v: env[v] for v in cfg.blocks[b].observed})
            break
        if b == fail_b:
            aid = cfg.fail_edges.get((prev, b))
            line = cfg.asserts[aid].line if aid is not None else None
            outcome = Outcome("fail", dict(env), line)
            break
        if b == assume_b:
            outcome = Outcome("assume", dict(env))
            break
        nxt = None
        try:
            for dst, g in outs:
                if g is None or g[0](g[1](env), g[2](env)):
                    nxt = dst
                    break
        except RuntimeFault:
            outcome = Outcome("fault")
            break
        if nxt is None:
            raise RuntimeError(f"no enabled out-edge at bb{b}")
        prev, b = b, nxt
    code.choose[0] = None
    return Trace(outcome, visits, path)
