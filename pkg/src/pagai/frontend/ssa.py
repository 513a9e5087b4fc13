"""Pruned SSA construction (dominance frontiers + liveness-filtered phi placement)."""

from __future__ import annotations

from .cfg import Cfg, Phi, expr_vars, rename_expr


def reverse_postorder(cfg: Cfg) -> list[int]:
    order, seen = [], {cfg.entry}
    stack = [(cfg.entry, iter(sorted(cfg.succs(cfg.entry))))]
    while stack:
        b, it = stack[-1]
        nxt = next(it, None)
        if nxt is None:
            order.append(b)
            stack.pop()
        elif nxt not in seen:
            seen.add(nxt)
            stack.append((nxt, iter(sorted(cfg.succs(nxt)))))
    return order[::-1]


def immediate_dominators(cfg: Cfg) -> dict[int, int]:
    """Cooper, Harvey and Kennedy's iterative algorithm. The entry maps to itself."""
    rpo = reverse_postorder(cfg)
    index = {b: i for i, b in enumerate(rpo)}
    idom = {cfg.entry: cfg.entry}

    def intersect(a, b):
        while a != b:
            while index[a] > index[b]:
                a = idom[a]
            while index[b] > index[a]:
                b = idom[b]
        return a

    changed = True
    while changed:
        changed = False
        for b in rpo[1:]:
            preds = [p for p in cfg.preds(b) if p in idom]
            new = preds[0]
            for p in preds[1:]:
                new = intersect(p, new)
            if idom.get(b) != new:
                idom[b] = new
                changed = True
    return idom


def dominates(idom: dict[int, int], a: int, b: int) -> bool:
    while True:
        if a == b:
            return True
        if idom[b] == b:
            return False
        b = idom[b]


def dominance_frontiers(cfg: Cfg, idom: dict[int, int]) -> dict[int, set[int]]:
    df: dict[int, set[int]] = {b: set() for b in idom}
    for b in idom:
        preds = [p for p in cfg.preds(b) if p in idom]
        if len(preds) < 2:
            continue
        for p in preds:
            runner = p
            while runner != idom[b]:
                df[runner].add(b)
                runner = idom[runner]
    return df


def block_uses_defs(cfg: Cfg, b: int):
    """(upward-exposed uses, defined vars) of a pre-SSA block, counting out-edge guards."""
    blk = cfg.blocks[b]
    uses, defs = set(), set()
    for d in blk.defs:
        uses |= expr_vars(d.rhs) - defs
        defs.add(d.target)
    for e in cfg.out_edges(b):
        if e.guard is not None:
            uses |= expr_vars(e.guard) - defs
    uses |= set(blk.observed) - defs
    return uses, defs


def live_in_sets(cfg: Cfg) -> dict[int, set[str]]:
    ud = {b: block_uses_defs(cfg, b) for b in cfg.blocks}
    live = {b: set() for b in cfg.blocks}
    order = reverse_postorder(cfg)[::-1]
    changed = True
    while changed:
        changed = False
        for b in order:
            out = set()
            for s in cfg.succs(b):
                out |= live[s]
            uses, defs = ud[b]
            new = uses | (out - defs)
            if new != live[b]:
                live[b] = new
                changed = True
    return live


def to_ssa(cfg: Cfg) -> Cfg:
    """Return an SSA copy; versions are named ``<var>.<k>``."""
    if cfg.ssa:
        return cfg
    cfg = cfg.copy()
    idom = immediate_dominators(cfg)
    df = dominance_frontiers(cfg, idom)
    live = live_in_sets(cfg)

    def_blocks: dict[str, set[int]] = {}
    for b, blk in cfg.blocks.items():
        for d in blk.defs:
            def_blocks.setdefault(d.target, set()).add(b)

    for v in sorted(def_blocks):
        work = list(def_blocks[v])
        placed = set()
        while work:
            b = work.pop()
            for y in df[b]:
                if y in placed:
                    continue
                placed.add(y)
                if v in live[y]:
                    cfg.blocks[y].phis.append(Phi(v, {}))
                if y not in def_blocks[v]:
                    work.append(y)

    children: dict[int, list[int]] = {b: [] for b in idom}
    for b, d in idom.items():
        if b != d:
            children[d].append(b)

    counters: dict[str, int] = {}
    stacks: dict[str, list[str]] = {}
    types = dict(cfg.var_types)
    origin = dict(cfg.var_origin)
    lines = dict(cfg.var_line)

    def fresh(v: str, line: int) -> str:
        k = counters.get(v, 0)
        counters[v] = k + 1
        name = f"{v}.{k}"
        types[name] = cfg.var_types[v]
        origin[name] = cfg.var_origin.get(v, v)
        lines[name] = line or cfg.var_line.get(v, 0)
        stacks.setdefault(v, []).append(name)
        return name

    def current(v: str) -> str:
        st = stacks.get(v)
        if not st:
            raise ValueError(f"use of {v} without a reaching definition in {cfg.name}")
        return st[-1]

    new_edges = {}
    stack: list[tuple[int, bool, list[str]]] = [(cfg.entry, False, [])]
    while stack:
        b, done, pushed = stack.pop()
        if done:
            for v in pushed:
                stacks[v].pop()
            continue
        blk = cfg.blocks[b]
        pushed = []
        for p in blk.phis:
            p.target = fresh(p.target, blk.line)
            pushed.append(p.target.rsplit(".", 1)[0])
        for d in blk.defs:
            d.rhs = rename_expr(d.rhs, current)
            base = d.target
            d.target = fresh(base, d.line)
            pushed.append(base)
        blk.observed = [current(v) for v in blk.observed]
        for e in cfg.out_edges(b):
            guard = rename_expr(e.guard, current) if e.guard is not None else None
            new_edges[(e.src, e.dst)] = type(e)(e.src, e.dst, guard)
            for p in cfg.blocks[e.dst].phis:
                base = _base_of(p, cfg.var_types)
                p.args[b] = current(base)
        stack.append((b, True, pushed))
        for c in sorted(children[b], reverse=True):
            stack.append((c, False, []))

    cfg.edges = [new_edges[(e.src, e.dst)] for e in cfg.edges]
    cfg.var_types, cfg.var_origin, cfg.var_line = types, origin, lines
    cfg.ssa = True
    cfg.reindex()
    return cfg


def _base_of(phi: Phi, base_types) -> str:
    """Phi targets are renamed when their block is visited; recover the variable."""
    if phi.target in base_types:
        return phi.target
    return phi.target.rsplit(".", 1)[0]


def check_single_definition(cfg: Cfg) -> bool:
    seen = set()
    for blk in cfg.blocks.values():
        for t in [p.target for p in blk.phis] + [d.target for d in blk.defs]:
            if t in seen:
                return False
            seen.add(t)
    return True
