"""Acceptance suite. Each test prints one ``ACCEPTANCE <n> PASS|FAIL: ...`` line."""

import contextlib
import io
import itertools
import random
import time

import pytest

from pagai.cli import main as cli_main
from pagai.domains import Polyhedron, make, oct_close
from pagai.engines import TECHNIQUES, run_technique
from pagai.frontend.interp import run_program, stream_chooser
from pagai.harness import (DOMAIN_PAIRS, TECHNIQUE_PAIRS, VERDICTS, MatrixConfig, run_matrix)
from pagai.harness.matrix import run_cell
from pagai.pipeline import load_file, materialize, source_names

from conftest import corpus_files, corpus_path, requires_z3
from helpers import dbm_constraints, rand_dbm, rand_value, smt_equivalent, smt_included

pytestmark = requires_z3

FULL_CONFIG = dict(fuzz_trials=10_000, seed=0, verify=True)
LOOP_FREE = ["lf01_sum", "lf02_scale", "lf03_swap", "lf04_const", "lf05_chain",
             "lf06_three", "lf07_neg", "lf08_update", "lf09_mixed", "lf10_real"]
BOUNDED_LOOPS = ["counter", "fig1", "modes3", "reals", "two_loops", "nested", "for_loop",
                 "two_phase", "division", "nonlinear"]


@pytest.fixture
def announce(capsys):
    def say(n, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {detail}")
    return say


@pytest.fixture(scope="module")
def full_matrix():
    t0 = time.perf_counter()
    rep = run_matrix(corpus_files(), MatrixConfig(**FULL_CONFIG))
    return rep, time.perf_counter() - t0


# 1 ----------------------------------------------------------------------------------------------


def test_fig1_discrimination(announce):
    prog = load_file(corpus_path("fig1"))
    config = MatrixConfig()
    verdicts, times = {}, {}
    for t in ("s", "pf", "gpf", "dis"):
        t0 = time.perf_counter()
        cell = run_cell(prog, t, "pk", config)
        times[t] = time.perf_counter() - t0
        verdicts[t] = [a["verdict"] for a in cell.asserts["main"]]
    ok = (verdicts["s"] == ["unproved"]
          and all(verdicts[t] == ["proved"] for t in ("pf", "gpf", "dis"))
          and all(s < 5.0 for s in times.values()))
    announce(1, ok, "fig1/pk " + ", ".join(f"{t}={verdicts[t][0]} ({times[t]:.2f}s)" for t in verdicts))
    assert ok


# 2 ----------------------------------------------------------------------------------------------


def test_soundness_suite(full_matrix, announce):
    rep, secs = full_matrix
    bad = [(c.benchmark, c.technique, c.domain, c.violations) for c in rep.cells
           if not c.ok or c.violations != 0]
    n = len(rep.cells)
    ok = not bad and n == len(corpus_files()) * 15 and secs < 600
    announce(2, ok, f"{n} cells x 10^4 trials, {len(bad)} with violations or errors, "
                    f"matrix wall time {secs:.1f}s (limit 600s)")
    assert ok, bad


# 3 ----------------------------------------------------------------------------------------------


def test_inductiveness_certificate(full_matrix, announce):
    rep, _ = full_matrix
    bad = [(c.benchmark, c.technique, c.domain) for c in rep.cells if c.inductive is not True]
    ok = not bad
    announce(3, ok, f"{len(rep.cells) - len(bad)}/{len(rep.cells)} cells certified inductive")
    assert ok, bad


# 4 ----------------------------------------------------------------------------------------------

LAW_CHECKS = 100_000
SMT_SAMPLES = 150


def _laws(rng, domain, counter):
    """Order, join, meet and widening laws on one random triple; returns failures."""
    dims = ["x", "y", "z", "w"][:rng.randint(1, 4)]
    a, b, c = (rand_value(rng, domain, dims) for _ in range(3))
    j = a.join(b)
    m = a.meet(b)
    w = a.widen(j)
    top, bot = make(domain, dims), make(domain, dims, "bottom")
    checks = [
        a.is_leq(a),
        a.is_leq(j), b.is_leq(j),
        m.is_leq(a), m.is_leq(b),
        a.is_leq(w), j.is_leq(w),
        bot.is_leq(a), a.is_leq(top),
        j.equals(b.join(a)),
    ]
    ab, bc = a.is_leq(b), b.is_leq(c)
    checks.append(not (ab and bc) or a.is_leq(c))
    checks.append(not (ab and b.is_leq(a)) or a.equals(b))
    counter[0] += len(checks)
    return len(checks) - sum(checks)


def _oct_closure(rng, session, counter, with_smt):
    n = rng.randint(1, 4)
    dims = ["x", "y", "z", "w"][:n]
    m = rand_dbm(rng, n)
    c, empty = oct_close(m)
    fails = 0
    if not empty:
        c2, e2 = oct_close(c)
        fails += int(e2 or c2 != c)  # idempotent
        fails += sum(1 for i in range(2 * n) for j in range(2 * n)
                     if m[i][j] is not None and (c[i][j] is None or c[i][j] > m[i][j]))  # never loosens
        counter[0] += 2
    if with_smt:
        raw = dbm_constraints(dims, m)
        if empty:
            fails += int(not smt_included(session, dims, raw, [make("box", dims, "bottom").to_constraints()[0]]))
        else:
            fails += int(not smt_equivalent(session, dims, raw, dbm_constraints(dims, c)))
        counter[0] += 1
    return fails


def _dd_roundtrip(rng, session, counter, with_smt):
    dims = ["x", "y", "z", "w"][:rng.randint(1, 4)]
    p = rand_value(rng, "pk", dims)
    if p.is_bottom():
        return 0
    q = Polyhedron(dims, gens=p.generators)
    fails = int(not (q.is_leq(p) and p.is_leq(q)))
    counter[0] += 1
    if with_smt:
        fails += int(not smt_equivalent(session, dims, p.to_constraints(), q.to_constraints()))
        counter[0] += 1
    return fails


@pytest.mark.parametrize("domain", ["box", "oct", "pk"])
def test_domain_laws(domain, session, announce):
    rng = random.Random({"box": 1, "oct": 2, "pk": 3}[domain])
    counter = [0]
    fails = 0
    extra = 0
    t0 = time.perf_counter()
    while counter[0] < LAW_CHECKS:
        fails += _laws(rng, domain, counter)
        if domain == "oct":
            fails += _oct_closure(rng, session, counter, extra < SMT_SAMPLES)
            extra += 1
        elif domain == "pk":
            fails += _dd_roundtrip(rng, session, counter, extra < SMT_SAMPLES)
            extra += 1
    ok = fails == 0
    what = {"box": "", "oct": ", closure idempotence/tightening + SMT gamma checks",
            "pk": ", double-description round trips + SMT gamma checks"}[domain]
    announce(4, ok, f"{domain}: {counter[0]} law checks{what}, {fails} failures "
                    f"({time.perf_counter() - t0:.1f}s)")
    assert ok


# 5 ----------------------------------------------------------------------------------------------


def _brute_hull(prog, lo=-3, hi=3):
    """Exit-value interval hull of every run with nondet values drawn from [lo, hi]."""
    draws = prog.source.count("nondet_")
    hull: dict[str, list] = {}
    for stream in itertools.product(range(lo, hi + 1), repeat=draws):
        out = run_program(prog.program, stream_chooser({}, stream), 100_000)
        if out.kind != "exit":
            continue
        for k, v in out.values.items():
            h = hull.setdefault(k, [v, v])
            h[0], h[1] = min(h[0], v), max(h[1], v)
    return hull


def _box_exit(name):
    prog = load_file(corpus_path(name))
    unit = prog.functions["main"]
    info = unit.info
    inv = run_technique("s", info, "box")
    ex = info.cfg.exit
    v = materialize(info, ex, inv.value(ex))
    names = source_names(info, ex)
    bounds = {names[k]: b for k, b in v.bounds().items() if k in names}
    return prog, bounds


def test_oracle_precision(announce):
    exact, bad = 0, []
    for name in LOOP_FREE:
        prog, box = _box_exit(name)
        hull = _brute_hull(prog)
        for k, (lo, hi) in hull.items():
            if k not in box:
                continue
            if box[k] != (lo, hi):
                bad.append((name, k, box[k], (lo, hi)))
            else:
                exact += 1
    for name in BOUNDED_LOOPS:
        prog, box = _box_exit(name)
        hull = _brute_hull(prog)
        for k, (lo, hi) in hull.items():
            if k not in box:
                continue
            blo, bhi = box[k]
            if (blo is not None and blo > lo) or (bhi is not None and bhi < hi):
                bad.append((name, k, box[k], (lo, hi)))
    ok = not bad and exact > 0
    announce(5, ok, f"{len(LOOP_FREE)} loop-free programs exact ({exact} variables), "
                    f"{len(BOUNDED_LOOPS)} bounded-loop programs contain the hull; {len(bad)} mismatches")
    assert ok, bad


# 6 ----------------------------------------------------------------------------------------------


def test_pf_refines_classic(session, announce):
    total, bad = 0, []
    for path in corpus_files():
        prog = load_file(path)
        for fname, unit in prog.functions.items():
            info = unit.info
            if info.widening_points:
                continue
            pf = run_technique("pf", info, "pk", session)
            s = run_technique("s", info, "pk", session)
            for p in info.analysis_points:
                total += 1
                if not pf.value(p).is_leq(s.value(p)):
                    bad.append((prog.name, fname, p))
    ok = not bad and total > 0
    announce(6, ok, f"PF is_leq S at {total - len(bad)}/{total} points of loop-free functions (pk)")
    assert ok, bad


# 7 ----------------------------------------------------------------------------------------------


def test_enbloc_precision(announce):
    missing = []
    for t in TECHNIQUES:
        for d in ("box", "oct", "pk"):
            buf = io.StringIO()
            with contextlib.redirect_stdout(buf):
                cli_main(["analyze", corpus_path("enbloc"), "--technique", t, "--domain", d])
            exit_part = buf.getvalue().split("(exit)", 1)[1].split("\n  bb", 1)[0]
            if "    z = 0" not in exit_part.splitlines():
                missing.append((t, d))
    ok = not missing
    announce(7, ok, f"z = 0 printed at exit in {15 - len(missing)}/15 technique/domain runs")
    assert ok, missing


# 8 ----------------------------------------------------------------------------------------------


def test_determinism(full_matrix, announce):
    rep, _ = full_matrix
    again = run_matrix(corpus_files(), MatrixConfig(**FULL_CONFIG))
    a, b = rep.to_json(timings=False), again.to_json(timings=False)
    ok = a == b
    announce(8, ok, f"two full matrix runs, masked JSON reports {'identical' if ok else 'differ'} "
                    f"({len(a)} bytes)")
    assert ok


# 9 ----------------------------------------------------------------------------------------------


def test_table_shape(full_matrix, announce):
    rep, _ = full_matrix
    text = rep.to_text()
    tech = [t for t in rep.tables if t.kind == "technique"]
    dom = [t for t in rep.tables if t.kind == "domain"]
    shape_ok = (len(tech) == 3 * len(TECHNIQUE_PAIRS) and len(dom) == len(DOMAIN_PAIRS)
                and all(f"\n{t.label} (" in text for t in rep.tables))
    bad_rows = []
    rows = 0
    for t in rep.tables:
        for r in t.rows + [t.total()]:
            if r.degenerate:
                continue
            rows += 1
            s = sum(r.percentages()[v] for v in VERDICTS)
            if abs(s - 100.0) > 0.02:
                bad_rows.append((t.label, t.fixed, r.label, s))
    timing = rep.timings()
    timing_ok = all(f"Time in seconds (domain {d.upper()})" in text for d in ("box", "oct", "pk")) and all(
        set(timing[d][b["name"]]) == {"S", "G", "PF", "G+PF", "DIS"}
        for d in ("box", "oct", "pk") for b in rep.benchmarks)
    ok = shape_ok and not bad_rows and timing_ok
    announce(9, ok, f"{len(tech)} technique tables (6 pairs x 3 domains), {len(dom)} domain tables, "
                    f"{rows} non-degenerate rows sum to 100 +/- 0.02, timing tables "
                    f"{'present' if timing_ok else 'missing'}")
    assert ok, bad_rows
