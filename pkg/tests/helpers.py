"""Shared test utilities: random abstract values and an SMT equivalence oracle that is
written independently of the package's own encoder."""

from fractions import Fraction

from pagai.domains import make
from pagai.linear import EQ, Constraint, Linear


def rand_linear(rng, dims, width=2, const=6):
    return Linear({v: rng.randint(-width, width) for v in dims}, rng.randint(-const, const))


def rand_octagonal(rng, dims, const=6):
    """A random unit two-variable (or one-variable) constraint."""
    k = rng.choice([1, 2]) if len(dims) > 1 else 1
    vs = rng.sample(list(dims), k)
    return Constraint(Linear({v: rng.choice([-1, 1]) for v in vs}, rng.randint(-const, const)))


def rand_value(rng, domain, dims, max_cons=4):
    """Random nonempty-or-empty value built from random constraints (and sometimes a join)."""
    v = make(domain, dims)
    cs = []
    for _ in range(rng.randint(0, max_cons)):
        if domain == "pk" and rng.random() < 0.6:
            cs.append(Constraint(rand_linear(rng, dims)))
        else:
            cs.append(rand_octagonal(rng, dims))
    if rng.random() < 0.1 and dims:
        cs.append(Constraint(Linear({dims[0]: 1}, -rng.randint(-3, 3)), EQ))
    v = v.meet_constraints(cs)
    if rng.random() < 0.3:
        v = v.join(rand_value(rng, domain, dims, max_cons=2) if max_cons > 2 else v)
    return v


def rand_point(rng, dims, span=8):
    return {v: Fraction(rng.randint(-span * 2, span * 2), 2) for v in dims}


# independent SMT-LIB rendering ---------------------------------------------------------


def _num(q):
    q = Fraction(q)
    s = f"(/ {abs(q.numerator)}.0 {q.denominator}.0)" if q.denominator != 1 else f"{abs(q.numerator)}.0"
    return f"(- {s})" if q < 0 else s


def _lin(e: Linear, prefix):
    terms = [f"(* {_num(k)} |{prefix}{v}|)" for v, k in sorted(e.coeffs.items())]
    terms.append(_num(e.const))
    return terms[0] if len(terms) == 1 else f"(+ {' '.join(terms)})"


def smt_conj(cs, prefix="v!"):
    parts = []
    for c in cs:
        op = "=" if c.kind == EQ else "<="
        parts.append(f"({op} {_lin(c.expr, prefix)} 0.0)")
    if not parts:
        return "true"
    return parts[0] if len(parts) == 1 else f"(and {' '.join(parts)})"


def smt_included(session, dims, a_cons, b_cons, prefix="v!") -> bool:
    """γ(A) ⊆ γ(B) over the reals, decided as unsatisfiability of A ∧ ¬B."""
    session.push()
    try:
        for v in dims:
            session.send(f"(declare-fun |{prefix}{v}| () Real)")
        status, _ = session.solve([smt_conj(a_cons, prefix), f"(not {smt_conj(b_cons, prefix)})"],
                                  want_model=False)
    finally:
        session.pop()
    assert status in ("sat", "unsat"), status
    return status == "unsat"


def smt_equivalent(session, dims, a_cons, b_cons) -> bool:
    return smt_included(session, dims, a_cons, b_cons) and smt_included(session, dims, b_cons, a_cons)


# raw octagon matrices --------------------------------------------------------------------


def dbm_constraints(dims, m):
    """Constraints form_j - form_i <= m[i][j] of a raw (not necessarily closed) matrix."""
    def form(k):
        v = dims[k // 2]
        return Linear.var(v) if k % 2 == 0 else -Linear.var(v)
    out = []
    n = len(m)
    for i in range(n):
        for j in range(n):
            if m[i][j] is None:
                continue
            e = form(j) - form(i)
            out.append(Constraint(e - m[i][j]))
    return out


def rand_dbm(rng, n_vars, density=0.35, span=6):
    n = 2 * n_vars
    m = [[None] * n for _ in range(n)]
    for i in range(n):
        m[i][i] = Fraction(0)
        for j in range(n):
            if i != j and rng.random() < density:
                m[i][j] = Fraction(rng.randint(-span, span * 2), rng.choice([1, 1, 2]))
    return m
