"""Octagons as difference-bound matrices over the forms +v_i (index 2i) and -v_i (2i+1).

``m[i][j]`` bounds ``form_j - form_i``; ``None`` is +infinity.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Optional, Sequence

from ..linear import Constraint, Linear
from .base import AbstractValue, Bound, interval_ub, propagate, split_le

Matrix = list[list[Bound]]


def _bar(i: int) -> int:
    return i ^ 1


def _add(a: Bound, b: Bound) -> Bound:
    return None if a is None or b is None else a + b


def _lt(a: Bound, b: Bound) -> bool:
    """a < b for upper bounds."""
    if a is None:
        return False
    return b is None or a < b


def _idx(sign: int, k: int) -> int:
    return 2 * k if sign > 0 else 2 * k + 1


def oct_close(m: Matrix) -> tuple[Matrix, bool]:
    """Tight closure over the rationals; returns (closed copy, empty flag)."""
    n = len(m)
    c = [row[:] for row in m]
    # coherence: m[i][j] and m[bar j][bar i] bound the same constraint
    for i in range(n):
        for j in range(n):
            a, b = c[i][j], c[_bar(j)][_bar(i)]
            if b is not None and (a is None or b < a):
                c[i][j] = b
    for i in range(n):
        if c[i][i] is None or c[i][i] > 0:
            c[i][i] = Fraction(0)
    for k in range(n):
        ck = c[k]
        for i in range(n):
            cik = c[i][k]
            if cik is None:
                continue
            ci = c[i]
            for j in range(n):
                ckj = ck[j]
                if ckj is None:
                    continue
                s = cik + ckj
                cij = ci[j]
                if cij is None or s < cij:
                    ci[j] = s
    for i in range(n):
        if c[i][i] < 0:
            return c, True
    for i in range(n):
        ci_bar = c[i][_bar(i)]
        if ci_bar is None:
            continue
        for j in range(n):
            cbj = c[_bar(j)][j]
            if cbj is None:
                continue
            s = (ci_bar + cbj) / 2
            if c[i][j] is None or s < c[i][j]:
                c[i][j] = s
    for i in range(n):
        if c[i][i] < 0:
            return c, True
        c[i][i] = Fraction(0)
    return c, False


class Octagon(AbstractValue):
    domain = "oct"

    def __init__(self, dims: Sequence[str], m: Optional[Matrix], closed=False, empty=False):
        self.dims = tuple(dims)
        self.empty = empty
        self.m = m if m is not None else _top_matrix(len(self.dims))
        self.closed = closed
        self._closed_cache = None

    @classmethod
    def top(cls, dims):
        return cls(dims, None, closed=True)

    @classmethod
    def bottom(cls, dims):
        return cls(dims, None, closed=True, empty=True)

    def close(self) -> "Octagon":
        if self.empty or self.closed:
            return self
        if self._closed_cache is None:
            c, empty = oct_close(self.m)
            self._closed_cache = Octagon.bottom(self.dims) if empty else Octagon(self.dims, c, True)
        return self._closed_cache

    def is_bottom(self):
        return self.close().empty

    def _unary(self) -> tuple[dict, dict]:
        m = self.m
        lo, hi = {}, {}
        for k, v in enumerate(self.dims):
            h = m[2 * k + 1][2 * k]
            l = m[2 * k][2 * k + 1]
            hi[v] = None if h is None else h / 2
            lo[v] = None if l is None else -l / 2
        return lo, hi

    def bounds(self):
        lo, hi = self.close()._unary()
        return {v: (lo[v], hi[v]) for v in self.dims}

    # lattice
    def join(self, other):
        self.check_dims(other)
        a, b = self.close(), other.close()
        if a.empty:
            return b
        if b.empty:
            return a
        m = [[None if x is None or y is None else max(x, y) for x, y in zip(ra, rb)]
             for ra, rb in zip(a.m, b.m)]
        return Octagon(self.dims, m, closed=True)

    def meet(self, other):
        self.check_dims(other)
        if self.empty or other.empty:
            return Octagon.bottom(self.dims)
        m = [[y if x is None else x if y is None else min(x, y) for x, y in zip(ra, rb)]
             for ra, rb in zip(self.m, other.m)]
        return Octagon(self.dims, m).close()

    def meet_constraints(self, cs):
        if self.empty:
            return self
        forms = split_le(cs)
        if not forms:
            return self
        m = [row[:] for row in self.m]
        pos = {v: k for k, v in enumerate(self.dims)}
        rest = []
        for f in forms:
            if not f.coeffs:
                if f.const > 0:
                    return Octagon.bottom(self.dims)
                continue
            items = list(f.coeffs.items())
            mags = {abs(k) for _, k in items}
            if len(items) <= 2 and len(mags) == 1:
                a = mags.pop()
                c = -f.const / a  # sum of signed unit terms <= c
                if len(items) == 1:
                    (v, k), = items
                    i = pos[v]
                    # +v <= c : m[2i+1][2i] = 2c ;  -v <= c : m[2i][2i+1] = 2c
                    j, i2 = (_idx(1, i), _idx(-1, i)) if k > 0 else (_idx(-1, i), _idx(1, i))
                    _tighten(m, i2, j, 2 * c)
                else:
                    (v1, k1), (v2, k2) = items
                    # s1 v1 + s2 v2 = form_j - form_i with j = (s1 v1), i = (-s2 v2)
                    j = _idx(1 if k1 > 0 else -1, pos[v1])
                    i = _idx(-1 if k2 > 0 else 1, pos[v2])
                    _tighten(m, i, j, c)
                    _tighten(m, _bar(j), _bar(i), c)
            else:
                rest.append(f)
        v = Octagon(self.dims, m).close()
        if rest and not v.empty:
            lo, hi = v._unary()
            if not propagate(lo, hi, rest):
                return Octagon.bottom(self.dims)
            m = [row[:] for row in v.m]
            for k, name in enumerate(self.dims):
                if hi[name] is not None:
                    _tighten(m, 2 * k + 1, 2 * k, 2 * hi[name])
                if lo[name] is not None:
                    _tighten(m, 2 * k, 2 * k + 1, -2 * lo[name])
            v = Octagon(self.dims, m).close()
        return v

    def widen(self, other):
        """Entries of the (non-closed) left matrix that the right one does not exceed."""
        self.check_dims(other)
        if self.is_bottom():
            return other
        b = self.join(other)
        m = [[x if x is not None and y is not None and y <= x else None for x, y in zip(ra, rb)]
             for ra, rb in zip(self.m, b.m)]
        return Octagon(self.dims, m)

    def is_leq(self, other):
        self.check_dims(other)
        a = self.close()
        if a.empty:
            return True
        if other.is_bottom():
            return False
        for ra, rb in zip(a.m, other.m):
            for x, y in zip(ra, rb):
                if y is not None and (x is None or x > y):
                    return False
        return True

    def to_constraints(self):
        a = self.close()
        if a.empty:
            return [Constraint(Linear.constant(1))]
        n = len(self.dims)
        seen = set()
        out = []
        m = a.m
        for i in range(2 * n):
            for j in range(2 * n):
                if i == j or m[i][j] is None:
                    continue
                # form_j - form_i <= m[i][j]
                e = _form(self.dims, j) - _form(self.dims, i)
                if not e.coeffs:
                    continue
                c = Constraint.le(e, m[i][j])
                if c not in seen:
                    seen.add(c)
                    out.append(c)
        return _merge_equalities(out)

    def contains(self, env):
        a = self.close()
        if a.empty:
            return False
        vals = []
        for v in self.dims:
            x = env[v]
            vals += [x, -x]
        for i, row in enumerate(a.m):
            for j, b in enumerate(row):
                if b is not None and vals[j] - vals[i] > b:
                    return False
        return True

    def adapt_dims(self, new_dims):
        a = self.close()
        if a.empty:
            return Octagon.bottom(new_dims)
        old = {v: k for k, v in enumerate(self.dims)}
        n = len(new_dims)
        src = []
        for v in new_dims:
            k = old.get(v)
            src += [None, None] if k is None else [2 * k, 2 * k + 1]
        m = _top_matrix(n)
        for i in range(2 * n):
            if src[i] is None:
                continue
            for j in range(2 * n):
                if src[j] is not None:
                    m[i][j] = a.m[src[i]][src[j]]
        return Octagon(new_dims, m, closed=True)

    def upper_bound(self, e: Linear) -> Bound:
        """Upper bound of an affine form: best of interval evaluation and pairwise
        decompositions through the closed matrix."""
        a = self.close()
        lo, hi = a._unary()
        best = interval_ub(e, lo, hi)
        items = list(e.coeffs.items())
        pos = {v: k for k, v in enumerate(self.dims)}
        for x in range(len(items)):
            for y in range(x + 1, len(items)):
                (u, ku), (w, kw) = items[x], items[y]
                k = min(abs(ku), abs(kw))
                su, sw = (1 if ku > 0 else -1), (1 if kw > 0 else -1)
                entry = a.m[_idx(-sw, pos[w])][_idx(su, pos[u])]
                if entry is None:
                    continue
                residual = e - Linear({u: su * k, w: sw * k})
                r = interval_ub(residual, lo, hi)
                if r is None:
                    continue
                cand = r + k * entry
                if best is None or cand < best:
                    best = cand
        return best

    def image(self, targets, exprs):
        a = self.close()
        if a.empty:
            return Octagon.bottom(targets)
        n = len(targets)
        m = _top_matrix(n)
        signed = []
        for e in exprs:
            signed.append(None if e is None else (e, -e))
        for p in range(n):
            if signed[p] is None:
                continue
            ep, en = signed[p]
            h, l = a.upper_bound(ep), a.upper_bound(en)
            if h is not None:
                m[2 * p + 1][2 * p] = 2 * h
            if l is not None:
                m[2 * p][2 * p + 1] = 2 * l
            for q in range(p + 1, n):
                if signed[q] is None:
                    continue
                for sp in (1, -1):
                    for sq in (1, -1):
                        f = (ep if sp > 0 else en) + (signed[q][0] if sq > 0 else signed[q][1])
                        b = a.upper_bound(f)
                        if b is None:
                            continue
                        j = _idx(sp, p)
                        i = _idx(-sq, q)
                        _tighten(m, i, j, b)
                        _tighten(m, _bar(j), _bar(i), b)
        return Octagon(targets, m).close()

    def payload_size(self) -> int:
        return 4 * len(self.dims) ** 2


def _top_matrix(n: int) -> Matrix:
    m = [[None] * (2 * n) for _ in range(2 * n)]
    for i in range(2 * n):
        m[i][i] = Fraction(0)
    return m


def _tighten(m: Matrix, i: int, j: int, b: Fraction):
    if m[i][j] is None or b < m[i][j]:
        m[i][j] = b


def _form(dims, i: int) -> Linear:
    return Linear.var(dims[i // 2], 1 if i % 2 == 0 else -1)


def _merge_equalities(cs: list[Constraint]) -> list[Constraint]:
    """Pairs ``e <= 0`` and ``-e <= 0`` become ``e = 0``."""
    by_expr = {c.expr: c for c in cs}
    out, used = [], set()
    for c in cs:
        if c.expr in used:
            continue
        neg = Constraint(-c.expr)
        if neg.expr in by_expr and neg.expr not in used:
            used.add(c.expr)
            used.add(neg.expr)
            out.append(Constraint(c.expr, "=="))
        else:
            used.add(c.expr)
            out.append(c)
    return out
