import random
from fractions import Fraction

from pagai.ir import (analyze_cfg, block_transfer, compute_widening_points, dump_cfg,
                      is_acyclic_without, live_by_linearity, scc_topo_order)
from pagai.linear import Linear
from pagai.pipeline import load_file, load_source

from conftest import corpus_files, corpus_path


def _unit(src, **kw):
    return load_source(src, **kw).functions["main"]


def _has_cycle(succ: dict[int, list[int]]) -> bool:
    """Independent cycle detection: Kahn's algorithm."""
    indeg = {b: 0 for b in succ}
    for b, ss in succ.items():
        for s in ss:
            indeg[s] += 1
    todo = [b for b, d in indeg.items() if d == 0]
    seen = 0
    while todo:
        b = todo.pop()
        seen += 1
        for s in succ[b]:
            indeg[s] -= 1
            if indeg[s] == 0:
                todo.append(s)
    return seen != len(succ)


def test_cut_set_breaks_every_cycle_on_corpus():
    for path in corpus_files():
        for unit in load_file(path).functions.values():
            cfg, pw = unit.cfg, unit.info.widening_points
            # split each widening point: incoming edges stop there
            succ = {b: [s for s in cfg.succs(b) if s not in pw] for b in cfg.blocks}
            assert not _has_cycle(succ), path
            assert is_acyclic_without(cfg, pw)


def test_fig1_single_widening_point():
    unit = load_file(corpus_path("fig1"), unroll=False).functions["main"]
    info = unit.info
    assert len(info.widening_points) == 1
    head = next(iter(info.widening_points))
    # the head is the loop test t < 100
    guards = {str(e.guard) for e in unit.cfg.out_edges(head)}
    assert any("100" in g for g in guards)
    assert info.analysis_points == info.widening_points | {unit.cfg.entry}


def test_loop_free_has_no_widening_points():
    unit = load_file(corpus_path("lf01_sum")).functions["main"]
    assert unit.info.widening_points == set()
    assert unit.info.analysis_points == {unit.cfg.entry}


def test_two_sequential_loops_two_heads():
    unit = load_file(corpus_path("two_loops"), unroll=False).functions["main"]
    assert len(unit.info.widening_points) == 2
    assert compute_widening_points(unit.cfg) == unit.info.widening_points


def test_scc_order_fig1():
    unit = load_file(corpus_path("fig1"), unroll=False).functions["main"]
    order = scc_topo_order(unit.cfg)
    big = [c for c in order if len(c) > 1]
    assert len(big) == 1
    head = next(iter(unit.info.widening_points))
    assert head in big[0]
    idx = {b: i for i, c in enumerate(order) for b in c}
    for e in unit.cfg.edges:
        assert idx[e.src] <= idx[e.dst]
    assert idx[unit.cfg.entry] == 0


def test_scc_order_dag_singletons():
    unit = load_file(corpus_path("lf06_three")).functions["main"]
    order = scc_topo_order(unit.cfg)
    assert all(len(c) == 1 for c in order)
    idx = {b: i for i, c in enumerate(order) for b in c}
    for e in unit.cfg.edges:
        assert idx[e.src] < idx[e.dst]


def test_linear_definition_not_a_dimension():
    src = """int main() {
      int y = nondet_int(); int z = nondet_int();
      int x = y + z;
      int i = 0;
      while (i < 10) { i++; }
      assert(x >= y + z);
      return 0;
    }"""
    unit = _unit(src)
    info, cfg = unit.info, unit.cfg
    head = min(info.widening_points)
    names = {cfg.source_name(v) for v in info.dims[head]}
    assert "x" not in names
    # x is recovered from its affine definition over the dimensions
    views = info.view_exprs(head)
    x = next(v for v in views if cfg.source_name(v) == "x")
    y = next(v for v in views if cfg.source_name(v) == "y")
    z = next(v for v in views if cfg.source_name(v) == "z")
    assert views[x] == views[y] + views[z]
    assert views[x].vars() <= set(info.dims[head])


def test_dead_variable_absent():
    src = """int main() {
      int d = nondet_int();
      int i = 0;
      while (i < 10) { i++; }
      return 0;
    }"""
    unit = _unit(src)
    for b, dims in unit.info.dims.items():
        assert "d" not in {unit.cfg.source_name(v) for v in dims}


def test_nonlinear_definition_is_a_dimension():
    src = """int main() {
      int u = nondet_int(); int v = nondet_int();
      int w = u * v;
      int i = 0;
      while (i < 10) { i++; }
      assert(w >= 0);
      return 0;
    }"""
    unit = _unit(src)
    info, cfg = unit.info, unit.cfg
    head = min(info.widening_points)
    views = info.view_exprs(head)
    w = [v for v in info.dims[head] if cfg.source_name(v) == "w"]
    if not w:
        # w copies the (havoc) product temporary, which is then the dimension
        wv = next(v for v in views if cfg.source_name(v) == "w")
        (t,) = views[wv].vars()
        assert t in info.dims[head]
        defs = cfg.definitions()
        assert defs[t][1].rhs.op == "*"
    assert cfg.nonlinear


def _brute_liveness(cfg):
    """Plain iterative SSA liveness, then closure through linear definitions."""
    from pagai.frontend.cfg import expr_vars
    live_in = {b: set() for b in cfg.blocks}
    changed = True
    while changed:
        changed = False
        for b, blk in cfg.blocks.items():
            out = set()
            for s in cfg.succs(b):
                out |= live_in[s] - {p.target for p in cfg.blocks[s].phis}
                out |= {p.args[b] for p in cfg.blocks[s].phis if isinstance(p.args[b], str)}
            for e in cfg.out_edges(b):
                if e.guard is not None:
                    out |= expr_vars(e.guard.left) | expr_vars(e.guard.right)
            if b == cfg.exit:
                out |= set(blk.observed)
            cur = set(out)
            for d in reversed(blk.defs):
                cur.discard(d.target)
                cur |= expr_vars(d.rhs)
            cur |= {p.target for p in blk.phis}
            if cur != live_in[b]:
                live_in[b] = cur
                changed = True
    return live_in


def test_dims_within_brute_force_liveness():
    for path in corpus_files():
        unit = load_file(path).functions["main"]
        live = _brute_liveness(unit.cfg)
        lin = unit.info.linear
        for p in unit.info.analysis_points:
            # every dimension is live (directly or through linear definitions) and not itself linear
            closure = set(live[p])
            frontier = list(closure)
            while frontier:
                v = frontier.pop()
                if v in lin:
                    for u in lin[v].vars():
                        if u not in closure:
                            closure.add(u)
                            frontier.append(u)
            for v in unit.info.dims[p]:
                assert v in closure or v in {ph.target for ph in unit.cfg.blocks[p].phis}, (path, p, v)
                assert v not in lin, (path, p, v)


def test_enbloc_transfer_simplifies_to_zero():
    unit = load_file(corpus_path("enbloc")).functions["main"]
    info = unit.info
    cfg = unit.cfg
    # the exit value of z is an affine form with no variables and constant 0
    z = [v for v in info.view_exprs(cfg.exit) if cfg.source_name(v) == "z"]
    if z:
        assert info.view_exprs(cfg.exit)[z[0]] == Linear.constant(0)
    else:
        # z folded away entirely: check the defining expression instead
        zdefs = [v for v in info.expansion if cfg.source_name(v) == "z"]
        assert zdefs and all(info.expansion[v] == Linear.constant(0) for v in zdefs)


def test_single_block_path_is_identity():
    unit = load_file(corpus_path("fig1")).functions["main"]
    head = min(unit.info.widening_points)
    pa = block_transfer(unit.info, [head])
    assert pa.is_identity()


def test_fig1_increment_path():
    unit = load_file(corpus_path("fig1"), unroll=False).functions["main"]
    info, cfg = unit.info, unit.cfg
    head = min(info.widening_points)
    # follow: t<100, phase==0 (x += 2), phase!=1 via phase<1, back to head
    path = _find_path(cfg, head, head, {0: "==", 1: "<"})
    pa = block_transfer(info, path)
    by_name = {cfg.source_name(t): e for t, e in zip(pa.targets, pa.exprs)}
    src = {cfg.source_name(v): v for v in pa.src}
    assert by_name["x"] == Linear.var(src["x"]) + 2
    assert by_name["t"] == Linear.var(src["t"]) + 1
    assert by_name["phase"] == Linear.constant(1) - Linear.var(src["phase"])


def _find_path(cfg, start, end, wanted):
    """Depth-first path from ``start`` to ``end``: phase tests take the comparison given
    for their constant in ``wanted``, other tests their ``<`` side."""
    def ok(e):
        if e.guard is None:
            return True
        g = e.guard
        if cfg.source_name(getattr(g.left, "name", "")) == "phase":
            return wanted[g.right.value] == g.op
        return g.op == "<"

    def go(b, acc):
        for e in cfg.out_edges(b):
            if not ok(e):
                continue
            if e.dst == end:
                return acc + [e.dst]
            if e.dst in acc:
                continue
            r = go(e.dst, acc + [e.dst])
            if r:
                return r
        return None
    return go(start, [start])


def _loop_paths(cfg, head):
    out = []

    def go(b, acc):
        for s in cfg.succs(b):
            if s == head:
                out.append(acc + [s])
            elif s not in acc:
                go(s, acc + [s])
    go(head, [head])
    return out


def test_transfer_compositionality():
    """transfer(A.B) agrees with transfer(B) after transfer(A) on random inputs."""
    rng = random.Random(7)
    for name in ("fig1", "modes3", "two_phase"):
        unit = load_file(corpus_path(name), unroll=False).functions["main"]
        info, cfg = unit.info, unit.cfg
        head = min(info.widening_points)
        for path in _loop_paths(cfg, head):
            for cut in range(1, len(path) - 1):
                a, b = path[:cut + 1], path[cut:]
                whole = block_transfer(info, path)
                pa = block_transfer(info, a)
                pb = block_transfer(info, b, dims_in=pa.targets)
                if whole.fresh or pa.fresh or pb.fresh:
                    continue
                for _ in range(100):
                    env = {v: Fraction(rng.randint(-50, 50), rng.choice([1, 1, 2])) for v in whole.src}
                    r1 = whole.apply(env)
                    mid = pa.apply(env)
                    r2 = None if mid is None else pb.apply(mid)
                    assert (r1 is None) == (r2 is None)
                    if r1 is not None:
                        assert r1 == r2


def test_dump_cfg_marks_points():
    unit = load_file(corpus_path("fig1")).functions["main"]
    text = dump_cfg(unit.info)
    assert text.startswith("function main")
    assert "P_W" in text and "P_R" in text
    assert text.count("\nblock ") == len(unit.cfg.blocks)


def test_live_by_linearity_direct():
    unit = load_file(corpus_path("fig1")).functions["main"]
    dims = live_by_linearity(unit.cfg)
    assert dims == unit.info.dims
    assert analyze_cfg(unit.cfg).dims == dims
