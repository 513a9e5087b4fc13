import json
import random
import sys

import pytest

from pagai.domains import make
from pagai.engines import InvariantMap, run_technique
from pagai.harness import (EQUAL, LEFT, RIGHT, UNCOMPARABLE, VERDICTS, MatrixConfig, PointComparison,
                           aggregate_report, collect_states, compare_invariants, compare_point, flip,
                           merge_reports, run_matrix, soundness_fuzz)
from pagai.harness import matrix as matrix_mod
from pagai.linear import parse_constraint
from pagai.pipeline import load_file, load_source

from conftest import corpus_path, requires_z3
from helpers import rand_value

SORTS = {"x": "Int", "y": "Int", "z": "Int"}


def cons(*texts):
    return [parse_constraint(t) for t in texts]


# compare_point ------------------------------------------------------------------------------


@requires_z3
def test_compare_examples(session):
    a = [cons("x >= 0", "x <= 1")]
    b = [cons("x >= 0", "x <= 2")]
    assert compare_point(session, a, b, SORTS).verdict == LEFT
    assert compare_point(session, b, a, SORTS).verdict == RIGHT
    assert compare_point(session, [cons("x <= 1")], [cons("y <= 1")], SORTS).verdict == UNCOMPARABLE
    assert compare_point(session, a, a, SORTS).verdict == EQUAL


@requires_z3
def test_compare_cross_domain(session):
    box = make("box", ["x"]).meet_constraints(cons("x >= 0", "x <= 10"))
    octo = make("oct", ["x"]).meet_constraints(cons("x >= 0", "x <= 10"))
    r = compare_point(session, [box.to_constraints()], [octo.to_constraints()], SORTS)
    assert r.verdict == EQUAL and not r.flagged


@requires_z3
def test_compare_disjunctive_and_empty(session):
    two = [cons("x = 0"), cons("x = 2")]
    hull = [cons("x >= 0", "x <= 2")]
    assert compare_point(session, two, hull, SORTS).verdict == LEFT
    assert compare_point(session, [], hull, SORTS).verdict == LEFT
    assert compare_point(session, [], [], SORTS).verdict == EQUAL
    # over the integers, {x = 0} or {x = 1} equals 0 <= x <= 1
    assert compare_point(session, [cons("x = 0"), cons("x = 1")], [cons("x >= 0", "x <= 1")],
                         SORTS).verdict == EQUAL


@requires_z3
def test_compare_partial_order(session):
    rng = random.Random(21)
    dims = ["x", "y"]
    vals = [[rand_value(rng, "pk", dims, 3).to_constraints()] for _ in range(12)]
    memo = {}

    def cmp(i, j):
        if (i, j) not in memo:
            memo[(i, j)] = compare_point(session, vals[i], vals[j], SORTS).verdict
        return memo[(i, j)]

    for i in range(len(vals)):
        assert cmp(i, i) == EQUAL
        for j in range(len(vals)):
            assert cmp(j, i) == flip(cmp(i, j))
    for i in range(len(vals)):
        for j in range(len(vals)):
            for k in range(len(vals)):
                if cmp(i, j) == LEFT and cmp(j, k) == LEFT:
                    assert cmp(i, k) == LEFT


def test_compare_unknown_is_flagged(tmp_path):
    from pagai.smt.session import SolverSession
    script = tmp_path / "fake.py"
    script.write_text("import sys\nfor l in sys.stdin:\n"
                      "    print('unknown' if l.strip() == '(check-sat)' else 'success', flush=True)\n")
    with SolverSession(f"{sys.executable} {script}") as s:
        r = compare_point(s, [cons("x <= 0")], [cons("x <= 1")], SORTS)
    assert r.verdict == UNCOMPARABLE and r.flagged


# aggregation ----------------------------------------------------------------------------------


def test_aggregate_percentages():
    vs = [PointComparison(EQUAL)] * 9 + [PointComparison(LEFT)]
    rep = aggregate_report("b", "G", "S", vs)
    assert rep.points == 10
    assert rep.percentages() == {LEFT: 10.0, RIGHT: 0.0, EQUAL: 90.0, UNCOMPARABLE: 0.0}


def test_aggregate_degenerate():
    rep = aggregate_report("empty", "G", "S", [])
    assert rep.degenerate and rep.points == 0
    assert set(rep.percentages().values()) == {0.0}
    assert rep.to_dict()["degenerate"] is True


def test_percentages_round_to_two_decimals():
    vs = [PointComparison(LEFT)] + [PointComparison(EQUAL)] * 2
    pct = aggregate_report("b", "a", "b", vs).percentages()
    assert pct[LEFT] == 33.33 and pct[EQUAL] == 66.67
    assert abs(sum(pct.values()) - 100) <= 0.02


def test_merge_reports():
    a = aggregate_report("a", "PF", "S", [PointComparison(LEFT)], {"PF": 1.0}, loc=10)
    b = aggregate_report("b", "PF", "S", [PointComparison(RIGHT, True)], {"PF": 0.5}, loc=5)
    m = merge_reports("total", [a, b])
    assert m.counts[LEFT] == 1 and m.counts[RIGHT] == 1 and m.flagged == 1
    assert m.loc == 15 and m.seconds == {"PF": 1.5}
    with pytest.raises(ValueError):
        merge_reports("total", [])


@requires_z3
def test_fig1_classic_vs_focusing(session):
    unit = load_file(corpus_path("fig1")).functions["main"]
    s = run_technique("s", unit.info, "pk", session)
    pf = run_technique("pf", unit.info, "pk", session)
    res = compare_invariants(session, s, pf)
    rep = aggregate_report("fig1", "S", "PF", list(res.values()))
    assert rep.points == 1
    assert rep.percentages()[RIGHT] == 100.0


# fuzzing ----------------------------------------------------------------------------------------


def test_fuzz_sound_output_has_no_violations():
    unit = load_file(corpus_path("counter")).functions["main"]
    for d in ("box", "oct", "pk"):
        assert soundness_fuzz(run_technique("s", unit.info, d), trials=50) == 0


def test_fuzz_detects_corrupted_invariant():
    unit = load_file(corpus_path("counter")).functions["main"]
    inv = run_technique("s", unit.info, "box")
    head = min(unit.info.widening_points)
    bad = InvariantMap(inv.function, inv.technique, inv.domain, inv.info, dict(inv.disjuncts))
    i_dim = next(v for v in unit.info.dims[head] if unit.cfg.source_name(v) == "i")
    # tighten the upper bound below reachable values
    bad.disjuncts[head] = [inv.value(head).meet_constraints([parse_constraint("x <= 5").rename({"x": i_dim})])]
    assert soundness_fuzz(bad, trials=10) >= 1


def test_fuzz_random_inputs_and_truncation():
    src = """int main() {
      int n = nondet_int(); int i = 0;
      while (i < n) { i++; }
      while (true) { i = i; }
      return 0;
    }"""
    unit = load_source(src).functions["main"]
    st = collect_states(unit.info, trials=5, seed=3)
    assert st.runs == 5 and st.truncated == 5 and not st.deterministic


def test_fuzz_deterministic_program_runs_once():
    unit = load_file(corpus_path("fig1")).functions["main"]
    st = collect_states(unit.info, trials=100, seed=0)
    assert st.deterministic and st.runs == 1
    head = min(unit.info.widening_points)
    assert len(st.states[head]) == 100  # the head is crossed after each of t = 1..100 increments


@requires_z3
def test_fig1_disjuncts_match_phase(session):
    unit = load_file(corpus_path("fig1")).functions["main"]
    info = unit.info
    inv = run_technique("dis", info, "pk", session)
    head = min(info.widening_points)
    st = collect_states(info, trials=10_000, seed=0)
    dims = list(info.dims[head])
    ph = next(i for i, v in enumerate(dims) if info.cfg.source_name(v) == "phase")
    for state in st.states[head]:
        env = dict(zip(dims, state))
        hits = [d for d in inv.disjuncts[head] if d.contains(env)]
        assert len(hits) == 1
        (d,) = hits
        lo, hi = d.bounds()[dims[ph]]
        assert lo == hi == state[ph]
    assert soundness_fuzz(inv, trials=10_000) == 0


# matrix -------------------------------------------------------------------------------------------


def _small_config(**kw):
    base = dict(techniques=("s", "pf"), domains=("box",))
    base.update(kw)
    return MatrixConfig(**base)


def test_single_technique_no_pairs():
    rep = run_matrix([corpus_path("counter")], MatrixConfig(techniques=("s",), domains=("box",)))
    assert rep.tables == []
    assert rep.timings()["box"]["counter"]["S"] is not None
    assert "Time in seconds (domain BOX)" in rep.to_text()


@requires_z3
def test_fig1_golden_cells():
    rep = run_matrix([corpus_path("fig1")], MatrixConfig(domains=("pk",)))
    assert len(rep.cells) == 5
    assert len([t for t in rep.tables if t.kind == "technique"]) == 6
    proved = {c.technique for c in rep.cells
              if all(a["verdict"] == "proved" for a in c.asserts["main"])}
    # S cannot prove the assertion; the SMT-based techniques can
    assert "s" not in proved
    assert {"pf", "gpf", "dis"} <= proved
    table = next(t for t in rep.tables if t.label == "PF/S")
    assert table.total().points == 1 and table.total().counts[LEFT] == 1


def test_quarantine_does_not_abort(monkeypatch):
    real = matrix_mod.run_technique

    def flaky(technique, *a, **kw):
        if technique == "s":
            raise RuntimeError("boom")
        return real(technique, *a, **kw)

    monkeypatch.setattr(matrix_mod, "run_technique", flaky)
    rep = run_matrix([corpus_path("counter")], _small_config(techniques=("s", "g")))
    bad = rep.cell("counter", "s", "box")
    assert not bad.ok and "boom" in bad.error
    assert rep.cell("counter", "g", "box").ok
    assert any(e["event"] == "quarantined" for e in rep.events)
    (table,) = rep.tables
    assert table.skipped == ["counter"] and table.rows == []
    assert rep.timings()["box"]["counter"]["S"] is None


def test_downgrade_recorded(tmp_path):
    script = tmp_path / "fake.py"
    script.write_text("import sys\nfor l in sys.stdin:\n    l = l.strip()\n"
                      "    print('unknown' if l == '(check-sat)' else '(model)' if l == '(get-model)'"
                      " else 'success', flush=True)\n")
    config = _small_config(solver=f"{sys.executable} {script}")
    rep = run_matrix([corpus_path("nonlinear")], config)
    cell = rep.cell("nonlinear", "pf", "box")
    assert cell.ok and cell.downgraded == ["main"]
    ev = [e for e in rep.events if e["event"] == "downgraded"]
    assert ev and ev[0]["functions"] == ["main"]
    assert "downgraded" in rep.to_text()


@requires_z3
def test_matrix_deterministic():
    paths = [corpus_path(n) for n in ("fig1", "modes3", "lf05_chain")]
    cfg = MatrixConfig(domains=("box", "pk"))
    a = run_matrix(paths, cfg).to_json(timings=False)
    b = run_matrix(paths, cfg).to_json(timings=False)
    assert a == b
    doc = json.loads(a)
    assert "timings" not in doc and "seconds" not in doc["cells"][0]


@requires_z3
def test_matrix_renderings():
    rep = run_matrix([corpus_path("fig1"), corpus_path("counter")], MatrixConfig(fuzz_trials=20, verify=True))
    text = rep.to_text()
    for label in ("G/S", "PF/S", "PF/G", "G+PF/PF", "G+PF/G", "DIS/G+PF", "PK/OCT", "PK/BOX", "OCT/BOX"):
        assert f"\n{label} (" in text
    csv_text = rep.to_csv()
    assert csv_text.startswith("table,pair,fixed,benchmark")
    assert all(c.violations == 0 and c.inductive for c in rep.cells)
    for t in rep.tables:
        pct = t.total().percentages()
        assert abs(sum(pct.values()) - 100) <= 0.02
        assert set(pct) == set(VERDICTS)
