"""Preprocessing: peel every natural loop once, and inline non-recursive calls."""

from __future__ import annotations

import copy
import itertools

from . import ast as A
from .cfg import Block, Cfg, Edge, prune_unreachable
from .ssa import dominates, immediate_dominators


def retreating_edges(cfg: Cfg) -> list[tuple[int, int]]:
    """Edges to a block on the DFS stack; children visited in block-id order."""
    out = []
    on_stack = {cfg.entry}
    seen = {cfg.entry}
    stack = [(cfg.entry, iter(sorted(cfg.succs(cfg.entry))))]
    while stack:
        b, it = stack[-1]
        nxt = next(it, None)
        if nxt is None:
            on_stack.discard(b)
            stack.pop()
        elif nxt in on_stack:
            out.append((b, nxt))
        elif nxt not in seen:
            seen.add(nxt)
            on_stack.add(nxt)
            stack.append((nxt, iter(sorted(cfg.succs(nxt)))))
    return out


def natural_loop(cfg: Cfg, header: int, latches) -> set[int]:
    body = {header}
    work = [l for l in latches if l != header]
    body.update(work)
    while work:
        b = work.pop()
        for p in cfg.preds(b):
            if p not in body:
                body.add(p)
                work.append(p)
    return body


def natural_loops(cfg: Cfg) -> dict[int, set[int]]:
    idom = immediate_dominators(cfg)
    latches: dict[int, list[int]] = {}
    for u, h in retreating_edges(cfg):
        if dominates(idom, h, u):
            latches.setdefault(h, []).append(u)
    return {h: natural_loop(cfg, h, ls) for h, ls in latches.items()}


def unroll_loops_once(cfg: Cfg) -> Cfg:
    """Peel the first iteration of every natural loop of the input graph.

    Loops are peeled outermost first; the copies made by an outer peel are not
    peeled again. Irreducible cycles are left alone and reported in
    ``cfg.diagnostics``.
    """
    cfg = cfg.copy()
    idom = immediate_dominators(cfg)
    for u, h in retreating_edges(cfg):
        if not dominates(idom, h, u):
            cfg.diagnostics.append(
                f"irreducible cycle through bb{u} -> bb{h}: loop unrolling skipped")
    loops = natural_loops(cfg)
    order = sorted(loops, key=lambda h: (-len(loops[h]), h))
    for h in order:
        idom = immediate_dominators(cfg)
        latches = [p for p in cfg.preds(h) if dominates(idom, h, p)]
        if not latches:
            continue
        _peel(cfg, h, natural_loop(cfg, h, latches))
    prune_unreachable(cfg)
    return cfg


def _peel(cfg: Cfg, header: int, body: set[int]):
    nxt = itertools.count(max(cfg.blocks) + 1)
    twin = {b: next(nxt) for b in sorted(body)}
    for b, c in twin.items():
        old = cfg.blocks[b]
        blk = Block(c, "peel" if b == header else old.label, old.line,
                    defs=copy.deepcopy(old.defs), observed=list(old.observed))
        cfg.blocks[c] = blk
    edges = []
    for e in cfg.edges:
        if e.dst == header and e.src not in body:
            edges.append(Edge(e.src, twin[header], e.guard))  # enter through the peeled copy
        else:
            edges.append(e)
        if e.src in body:
            dst = header if e.dst == header else twin.get(e.dst, e.dst)
            edges.append(Edge(twin[e.src], dst, e.guard))
            if (e.src, e.dst) in cfg.fail_edges:
                cfg.fail_edges[(twin[e.src], dst)] = cfg.fail_edges[(e.src, e.dst)]
    cfg.edges = edges
    cfg.reindex()


# inlining ---------------------------------------------------------------------------


class _Inliner:
    def __init__(self, program: A.Program, depth: int):
        self.originals = {f.name: f for f in program.functions}
        self.depth = depth
        self.counter = itertools.count(1)

    def function(self, f: A.Function) -> A.Function:
        g = copy.deepcopy(f)
        self.owner = g
        g.body = self.block(g.body, 1, (f.name,))
        return g

    def block(self, b: A.Block, level, stack) -> A.Block:
        out = []
        for s in b.body:
            out.extend(self.stmt(s, level, stack))
        return A.Block(out, pos=b.pos)

    def sub(self, s, level, stack):
        if s is None:
            return None
        res = self.stmt(s, level, stack)
        return res[0] if len(res) == 1 else A.Block(res, pos=s.pos)

    def stmt(self, s: A.Stmt, level, stack) -> list[A.Stmt]:
        pre: list[A.Stmt] = []
        ex = lambda e: self.expr(e, pre, level, stack)
        if isinstance(s, A.Block):
            return [self.block(s, level, stack)]
        if isinstance(s, A.Decl):
            if s.init is not None:
                s.init = ex(s.init)
        elif isinstance(s, A.Assign):
            s.value = ex(s.value)
        elif isinstance(s, A.Return):
            if s.value is not None:
                s.value = ex(s.value)
        elif isinstance(s, (A.Assert, A.Assume)):
            s.cond = ex(s.cond)
        elif isinstance(s, A.ExprStmt):
            call = s.expr
            if self.inlinable(call, level, stack):
                call.args = [ex(a) for a in call.args]
                return pre + [self.inline(call, None, level, stack)]
            call.args = [ex(a) for a in call.args]
        elif isinstance(s, A.If):
            s.cond = ex(s.cond)
            s.then = self.sub(s.then, level, stack)
            s.orelse = self.sub(s.orelse, level, stack)
        elif isinstance(s, (A.While, A.For)):
            cond_pre: list[A.Stmt] = []
            if s.cond is not None:
                s.cond = self.expr(s.cond, cond_pre, level, stack)
            if isinstance(s, A.For):
                s.init = self.sub(s.init, level, stack)
                s.step = self.sub(s.step, level, stack)
            body = self.sub(s.body, level, stack)
            if cond_pre:
                # the call must run on every iteration: test inside the body
                exit_test = A.If(A.Unary("!", s.cond, pos=s.pos, type=A.BOOL), A.Break(pos=s.pos),
                                 pos=s.pos)
                body = A.Block(cond_pre + [exit_test, body], pos=s.pos)
                s.cond = A.BoolLit(True, pos=s.pos, type=A.BOOL)
            s.body = body
        elif isinstance(s, A.Inlined):
            s.body = self.block(s.body, level, stack)
        return pre + [s]

    def inlinable(self, call: A.Call, level, stack) -> bool:
        return (call.func in self.originals and level <= self.depth
                and call.func not in stack)

    def expr(self, e: A.Expr, pre, level, stack, lazy=False) -> A.Expr:
        if isinstance(e, A.Call):
            if not lazy and self.inlinable(e, level, stack):
                e.args = [self.expr(a, pre, level, stack) for a in e.args]
                callee = self.originals[e.func]
                result = self.fresh_var("result", callee.ret_type, e.pos[0], e.func)
                pre.append(self.inline(e, result, level, stack))
                return A.Name(result, pos=e.pos, type=e.type)
            e.args = [self.expr(a, pre, level, stack, lazy) for a in e.args]
            return e
        if isinstance(e, A.Unary):
            e.operand = self.expr(e.operand, pre, level, stack, lazy)
        elif isinstance(e, A.Binary):
            e.left = self.expr(e.left, pre, level, stack, lazy)
            # the right operand of && / || is conditionally evaluated
            e.right = self.expr(e.right, pre, level, stack, lazy or e.op in ("&&", "||"))
        return e

    def fresh_var(self, name, vtype, line, callee) -> str:
        uid = f"{callee}_{next(self.counter)}_{name}"
        self.owner.vars[uid] = A.VarInfo(name, vtype, line)
        return uid

    def inline(self, call: A.Call, result, level, stack) -> A.Inlined:
        callee = copy.deepcopy(self.originals[call.func])
        k = next(self.counter)
        mapping = {}
        for v, info in callee.vars.items():
            uid = f"{callee.name}_{k}_{v}"
            mapping[v] = uid
            self.owner.vars[uid] = A.VarInfo(info.name, info.type, info.line)
        _rename(callee.body, mapping)
        binds = [A.Decl(t, mapping[p], arg, pos=call.pos)
                 for (t, p), arg in zip(callee.params, call.args)]
        body = self.block(A.Block(binds + callee.body.body, pos=call.pos), level + 1,
                          stack + (callee.name,))
        return A.Inlined(callee.name, result, body, pos=call.pos)


def _rename(node, mapping):
    if isinstance(node, list):
        for n in node:
            _rename(n, mapping)
        return
    if isinstance(node, A.Name):
        node.name = mapping.get(node.name, node.name)
        return
    if isinstance(node, (A.Decl, A.Assign)):
        node.name = mapping.get(node.name, node.name)
    if isinstance(node, (A.Expr, A.Stmt)):
        for f in vars(node).values():
            if isinstance(f, (A.Expr, A.Stmt, list)):
                _rename(f, mapping)


def inline_calls(program: A.Program, depth: int) -> A.Program:
    """Inline calls up to ``depth`` nested levels; recursive calls are never inlined.

    Calls that remain are lowered later as a nondeterministic return value.
    """
    if depth < 0:
        raise ValueError("inline depth must be non-negative")
    inl = _Inliner(program, depth)
    return A.Program([inl.function(f) for f in program.functions], program.source)
