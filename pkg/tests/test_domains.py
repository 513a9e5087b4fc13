import random
from fractions import Fraction

import pytest

from pagai.domains import Box, DimensionError, MAX_DIMS, Octagon, Polyhedron, make, oct_close
from pagai.ir import ParallelAssign
from pagai.linear import EQ, Constraint, Linear, parse_constraint

from helpers import dbm_constraints, rand_dbm, rand_point, rand_value, smt_equivalent, smt_included

F = Fraction
X, Y = Linear.var("x"), Linear.var("y")


def cons(*texts):
    return [parse_constraint(t) for t in texts]


def val(domain, dims, *texts):
    return make(domain, dims).meet_constraints(cons(*texts))


def same(a, b):
    return a.is_leq(b) and b.is_leq(a)


# construction ------------------------------------------------------------------------------


def test_make_top_bottom():
    assert make("box", ["x"]).bounds() == {"x": (None, None)}
    b = make("pk", ["x", "y"], "bottom")
    assert b.is_bottom() and b.generators is None
    z = make("oct", [])
    assert not z.is_bottom() and z.to_constraints() == []
    assert make("oct", [], "bottom").is_bottom()
    with pytest.raises(ValueError):
        make("box", ["x"], "middle")


def test_dimension_guard():
    dims = [f"v{i}" for i in range(MAX_DIMS + 1)]
    with pytest.raises(DimensionError):
        Polyhedron.top(dims)
    Polyhedron.top(dims[:MAX_DIMS])


# join ------------------------------------------------------------------------------------------


def test_box_join():
    a = val("box", ["x"], "x >= 0", "x <= 1")
    b = val("box", ["x"], "x >= 3", "x <= 5")
    assert a.join(b).bounds() == {"x": (0, 5)}


def test_poly_join_points():
    a = val("pk", ["x"], "x = 0")
    b = val("pk", ["x"], "x = 1")
    assert same(a.join(b), val("pk", ["x"], "x >= 0", "x <= 1"))


def test_oct_join_diagonal():
    a = val("oct", ["x", "y"], "x = 0", "y = 0")
    b = val("oct", ["x", "y"], "x = 1", "y = 1")
    j = a.join(b)
    expected = val("oct", ["x", "y"], "x >= 0", "x <= 1", "y >= 0", "y <= 1", "x - y = 0")
    assert same(j, expected)
    # per-form maximum over the two points, enumerated by hand
    forms = {"x": 1, "-x": 0, "y": 1, "-y": 0, "x+y": 2, "-x-y": 0, "x-y": 0, "y-x": 0}
    for text, bound in forms.items():
        c = parse_constraint(f"{text} <= {bound}")
        assert j.meet_constraints([c]).equals(j), text
        tighter = parse_constraint(f"{text} <= {bound - F(1, 2)}")
        assert not j.meet_constraints([tighter]).equals(j), text


# meet ------------------------------------------------------------------------------------------


def test_poly_meet_halfspace():
    v = make("pk", ["x", "t"]).meet_constraints(cons("t >= 100"))
    assert v.to_constraints() == cons("t >= 100")


def test_box_meet():
    v = val("box", ["x"], "x >= 0", "x <= 10").meet_constraints(cons("x <= 3"))
    assert v.bounds() == {"x": (0, 3)}


def test_box_drops_relational():
    v = make("box", ["x", "y"]).meet_constraints(cons("x + y <= 1"))
    assert v.is_top()


def test_meet_infeasible():
    for d in ("box", "oct", "pk"):
        assert val(d, ["x"], "x <= 0", "x >= 1").is_bottom()


# transfer ----------------------------------------------------------------------------------------


def test_poly_fig1_transfer():
    dims = ["x", "t", "phase"]
    start = val("pk", dims, "x = 0", "t = 0", "phase = 0")
    pa = ParallelAssign(dims, dims, [X + 2, Linear.var("t") + 1, 1 - Linear.var("phase")],
                        cons("t <= 99", "phase = 0"))
    out = start.transfer(pa)
    assert same(out, val("pk", dims, "x = 2", "t = 1", "phase = 1"))


def test_identity_transfer():
    a = val("oct", ["x", "y"], "x - y <= 2", "x >= 0")
    pa = ParallelAssign(["x", "y"], ["x", "y"], [X, Y])
    assert same(a.transfer(pa), a)


def test_box_havoc():
    a = val("box", ["x", "y"], "x >= 0", "x <= 1", "y >= 2", "y <= 3")
    out = a.transfer(ParallelAssign(["x", "y"], ["x", "y"], [None, Y]))
    assert out.bounds() == {"x": (None, None), "y": (2, 3)}


def test_poly_invertible_image_roundtrip():
    rng = random.Random(3)
    dims = ["x", "y"]
    fwd = ParallelAssign(dims, dims, [X + Y, Y - 3])
    back = ParallelAssign(dims, dims, [X - Y - 3, Y + 3])
    for _ in range(200):
        a = rand_value(rng, "pk", dims)
        assert same(a.transfer(fwd).transfer(back), a)


def test_transfer_sound_on_points():
    rng = random.Random(11)
    dims = ["x", "y"]
    pa = ParallelAssign(dims, dims, [X + Y * 2 - 1, None], cons("x <= y + 3"))
    for d in ("box", "oct", "pk"):
        for _ in range(200):
            a = rand_value(rng, d, dims)
            out = a.transfer(pa)
            for _ in range(5):
                p = rand_point(rng, dims)
                if not a.contains(p):
                    continue
                r = pa.apply(p)
                if r is None:
                    continue
                r["y"] = F(rng.randint(-50, 50))
                assert out.contains(r), (d, a, p)


# widening -----------------------------------------------------------------------------------------


def test_box_widen():
    a = val("box", ["x"], "x >= 0", "x <= 1")
    b = val("box", ["x"], "x >= 0", "x <= 2")
    assert a.widen(b).bounds() == {"x": (0, None)}


def test_poly_widen():
    a = val("pk", ["x"], "x >= 0", "x <= 1")
    b = val("pk", ["x"], "x >= 0", "x <= 2")
    assert same(a.widen(b), val("pk", ["x"], "x >= 0"))


def test_widen_stable_on_equal_args():
    rng = random.Random(5)
    for d in ("box", "oct", "pk"):
        for _ in range(100):
            a = rand_value(rng, d, ["x", "y"])
            assert same(a.widen(a), a)


def test_widening_chains_stabilize():
    rng = random.Random(9)
    dims = ["x", "y"]
    for d in ("box", "oct"):
        for _ in range(30):
            x = rand_value(rng, d, dims)
            limit = 2 * (4 * len(dims) * len(dims) if d == "oct" else 2 * len(dims)) + 1
            for step in range(limit + 1):
                y = rand_value(rng, d, dims)
                nxt = x.widen(x.join(y))
                if nxt.is_leq(x) and step > 0:
                    break
                x = nxt
            else:
                pytest.fail(f"{d} widening did not stabilize")
    for _ in range(30):
        x = rand_value(rng, "pk", dims)
        counts = []
        for _ in range(8):
            x = x.widen(x.join(rand_value(rng, "pk", dims)))
            counts.append(x.payload_size())
        assert all(b <= a for a, b in zip(counts, counts[1:])), counts


# order ----------------------------------------------------------------------------------------------


def test_bottom_leq_everything():
    for d in ("box", "oct", "pk"):
        assert make(d, ["x"], "bottom").is_leq(val(d, ["x"], "x <= 0"))


def test_interval_order():
    for d in ("box", "oct", "pk"):
        a = val(d, ["x"], "x >= 0", "x <= 1")
        b = val(d, ["x"], "x >= 0", "x <= 2")
        assert a.is_leq(b) and not b.is_leq(a)


def test_oct_order_matches_smt(session):
    a = val("oct", ["x", "y"], "x - y <= 0")
    b = val("oct", ["x", "y"], "x - y <= 1")
    assert a.is_leq(b) and not b.is_leq(a)
    dims = ["x", "y"]
    assert smt_included(session, dims, a.to_constraints(), b.to_constraints())
    assert not smt_included(session, dims, b.to_constraints(), a.to_constraints())


# export ---------------------------------------------------------------------------------------------


def test_box_export():
    assert set(val("box", ["x"], "x >= 0", "x <= 5").to_constraints()) == set(cons("x >= 0", "x <= 5"))


def test_top_exports_nothing():
    for d in ("box", "oct", "pk"):
        assert make(d, ["x", "y"]).to_constraints() == []


def test_bottom_exports_false():
    for d in ("box", "oct", "pk"):
        (c,) = make(d, ["x"], "bottom").to_constraints()
        assert c.is_trivial() is False


def test_poly_segment_export():
    p = Polyhedron(["x", "y"], gens=([(1, 0, 0), (1, 2, 1)], []))
    assert set(p.to_constraints()) == set(cons("x - 2*y = 0", "x >= 0", "x <= 2"))


def test_poly_constraints_and_generators_consistent():
    rng = random.Random(2)
    for _ in range(300):
        p = rand_value(rng, "pk", ["x", "y", "z"])
        if p.is_bottom():
            continue
        ineqs, eqs = p.constraints
        rays, lines = p.generators
        for c in ineqs:
            for r in rays:
                assert sum(a * b for a, b in zip(c, r)) >= 0
            for l in lines:
                assert sum(a * b for a, b in zip(c, l)) == 0
        for c in eqs:
            for g in list(rays) + list(lines):
                assert sum(a * b for a, b in zip(c, g)) == 0


# dimensions ------------------------------------------------------------------------------------------


def test_poly_project():
    v = val("pk", ["x", "y"], "x - y = 0", "y >= 0", "y <= 1").adapt_dims(["x"])
    assert same(v, val("pk", ["x"], "x >= 0", "x <= 1"))


def test_box_add_dim():
    v = val("box", ["x"], "x >= 0").adapt_dims(["x", "z"])
    assert v.bounds()["z"] == (None, None)


def _fourier_motzkin(cs, var):
    """Eliminate ``var`` from a list of <= / == constraints."""
    les = []
    for c in cs:
        if c.kind == EQ:
            les += [Constraint(c.expr), Constraint(-c.expr)]
        else:
            les.append(c)
    pos = [c for c in les if c.expr.coeffs.get(var, 0) > 0]
    neg = [c for c in les if c.expr.coeffs.get(var, 0) < 0]
    out = [c for c in les if c.expr.coeffs.get(var, 0) == 0]
    for p in pos:
        for n in neg:
            a, b = p.expr.coeffs[var], -n.expr.coeffs[var]
            out.append(Constraint(p.expr.scale(b) + n.expr.scale(a)))
    return out


def test_oct_projection_matches_fourier_motzkin(session):
    rng = random.Random(4)
    dims = ["x", "y", "z"]
    for _ in range(60):
        v = rand_value(rng, "oct", dims)
        if v.is_bottom():
            continue
        proj = v.adapt_dims(["x", "z"])
        fm = _fourier_motzkin(v.to_constraints(), "y")
        assert smt_equivalent(session, ["x", "z"], proj.to_constraints(), fm)


# closure --------------------------------------------------------------------------------------------


def _oct_matrix(dims, *texts):
    return Octagon.top(dims).meet_constraints(cons(*texts)).m


def test_closure_derives_bound():
    o = Octagon.top(["x", "y"]).meet_constraints(cons("x <= 1", "y - x <= 1"))
    assert o.bounds()["y"] == (None, 2)


def test_closure_idempotent_on_closed():
    rng = random.Random(8)
    for _ in range(200):
        m = rand_dbm(rng, 3)
        c, empty = oct_close(m)
        if empty:
            continue
        c2, empty2 = oct_close(c)
        assert not empty2 and c2 == c


def test_closure_detects_empty():
    m = [[F(0), None], [None, F(0)]]
    # +x <= 0 : m[1][0] = 0 ; -x <= -1 : m[0][1] = -2
    m[1][0] = F(0)
    m[0][1] = F(-2)
    assert oct_close(m)[1]


def test_closure_never_loosens_and_preserves_gamma(session):
    rng = random.Random(12)
    dims = ["a", "b", "c"]
    checked = 0
    for _ in range(80):
        m = rand_dbm(rng, len(dims))
        c, empty = oct_close(m)
        raw = dbm_constraints(dims, m)
        if empty:
            # infeasible: the raw constraints have no rational solution
            assert smt_included(session, dims, raw, [Constraint(Linear.constant(1))])
            continue
        for i in range(len(m)):
            for j in range(len(m)):
                if m[i][j] is not None:
                    assert c[i][j] is not None and c[i][j] <= m[i][j]
        assert smt_equivalent(session, dims, raw, dbm_constraints(dims, c))
        checked += 1
    assert checked > 10


def test_double_description_roundtrip(session):
    rng = random.Random(13)
    dims = ["x", "y", "z"]
    for _ in range(60):
        cs = [Constraint(Linear({v: rng.randint(-3, 3) for v in dims}, rng.randint(-5, 5)))
              for _ in range(rng.randint(1, 5))]
        p = Polyhedron.top(dims).meet_constraints(cs)
        if p.is_bottom():
            assert smt_included(session, dims, cs, [Constraint(Linear.constant(1))])
            continue
        assert smt_equivalent(session, dims, cs, p.to_constraints())
        # generators -> constraints again
        q = Polyhedron(dims, gens=p.generators)
        assert smt_equivalent(session, dims, cs, q.to_constraints())


# bounds -----------------------------------------------------------------------------------------------


def test_bounds_all_domains():
    for d in ("box", "oct", "pk"):
        v = val(d, ["x", "y"], "x >= -1", "x <= 4", "y - x <= 0")
        b = v.bounds()
        assert b["x"] == (-1, 4)
        # the box meet propagates bounds through the relational constraint before dropping it
        assert b["y"] == (None, 4)


def test_constraint_printing():
    c = parse_constraint("2*x - 3/2*y <= 1")
    assert str(c) == "4*x - 3*y <= 2"
    assert str(parse_constraint("x = 1/2")) == "2*x = 1"
    assert parse_constraint(str(c)) == c
