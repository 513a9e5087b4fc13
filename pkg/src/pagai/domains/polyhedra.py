"""Convex polyhedra in double description.

Both representations live in the homogenized space (xi, x_1..x_n):
a constraint vector ``c`` means ``c . (1, x) >= 0`` (or ``= 0``); a generator ``g`` with
``g[0] > 0`` is the point ``g[1:] / g[0]``, with ``g[0] == 0`` a ray (or a line).
All vectors are integer tuples with coprime entries. Conversion in either direction is
the same Chernikova-style procedure applied to the dual cone, with the combinatorial
adjacency test on saturation bitmasks.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Optional, Sequence

from ..linear import EQ, LE, Constraint, Linear
from .base import AbstractValue, DimensionError

MAX_DIMS = 24

Vec = tuple[int, ...]


def _normalize(v) -> Vec:
    g = 0
    for x in v:
        g = math.gcd(g, x)
    if g > 1:
        return tuple(x // g for x in v)
    return tuple(v)


def _dot(a: Vec, b: Vec) -> int:
    return sum(x * y for x, y in zip(a, b))


def _integer(v: Sequence[Fraction]) -> Vec:
    den = 1
    for q in v:
        den = den * q.denominator // math.gcd(den, q.denominator)
    return _normalize([int(q * den) for q in v])


def double_description(ineqs: Sequence[Vec], eqs: Sequence[Vec], size: int) -> tuple[list[Vec], list[Vec]]:
    """Extreme rays and lineality basis of the cone {y : c.y >= 0 (ineqs), c.y = 0 (eqs)}."""
    lines: list[Vec] = [tuple(1 if i == j else 0 for j in range(size)) for i in range(size)]
    rays: list[Vec] = []
    sats: list[int] = []
    done_mask = 0
    order = [(c, True) for c in eqs] + [(c, False) for c in ineqs]
    bit = 0
    for c, is_eq in order:
        if not any(c):
            continue
        k = 0 if is_eq else bit
        if not is_eq:
            bit += 1
        pivot = None
        for idx, l in enumerate(lines):
            d = _dot(c, l)
            if d:
                pivot = idx
                break
        if pivot is not None:
            lp = lines.pop(pivot)
            dp = _dot(c, lp)
            if dp < 0:
                lp = tuple(-x for x in lp)
                dp = -dp
            new_lines = []
            for l in lines:
                d = _dot(c, l)
                new_lines.append(l if d == 0 else _normalize([dp * x - d * y for x, y in zip(l, lp)]))
            lines = new_lines
            new_rays = []
            for r in rays:
                d = _dot(c, r)
                new_rays.append(r if d == 0 else _normalize([dp * x - d * y for x, y in zip(r, lp)]))
            rays = new_rays
            if not is_eq:
                sats = [s | (1 << k) for s in sats]
                rays.append(lp)
                sats.append(done_mask)
                done_mask |= 1 << k
            continue
        dots = [_dot(c, r) for r in rays]
        pos = [i for i, d in enumerate(dots) if d > 0]
        neg = [i for i, d in enumerate(dots) if d < 0]
        zero = [i for i, d in enumerate(dots) if d == 0]
        new_rays, new_sats = [], []
        if not is_eq:
            for i in pos:
                new_rays.append(rays[i])
                new_sats.append(sats[i])
        for i in zero:
            new_rays.append(rays[i])
            new_sats.append(sats[i] | ((1 << k) if not is_eq else 0))
        if pos and neg:
            cand = pos + neg + zero
            for p in pos:
                for q in neg:
                    common = sats[p] & sats[q]
                    adjacent = True
                    for r in cand:
                        if r != p and r != q and (sats[r] & common) == common:
                            adjacent = False
                            break
                    if not adjacent:
                        continue
                    dp, dq = dots[p], -dots[q]
                    new_rays.append(_normalize([dp * x + dq * y for x, y in zip(rays[q], rays[p])]))
                    new_sats.append(common | ((1 << k) if not is_eq else 0))
        rays, sats = new_rays, new_sats
        if not is_eq:
            done_mask |= 1 << k
    return rays, lines


def _reduce_rows(eqs: list[list[Fraction]], ncols: int) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form; pivots searched from the last column backwards."""
    rows = [r[:] for r in eqs]
    pivots = []
    rank = 0
    for col in range(ncols - 1, 0, -1):
        piv = None
        for i in range(rank, len(rows)):
            if rows[i][col] != 0:
                piv = i
                break
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        pr = rows[rank]
        inv = 1 / pr[col]
        rows[rank] = pr = [x * inv for x in pr]
        for i in range(len(rows)):
            if i != rank and rows[i][col] != 0:
                f = rows[i][col]
                rows[i] = [x - f * y for x, y in zip(rows[i], pr)]
        pivots.append(col)
        rank += 1
    return rows[:rank], pivots


class Polyhedron(AbstractValue):
    domain = "pk"

    def __init__(self, dims: Sequence[str], cons=None, gens=None, empty=False):
        """``cons`` = (ineqs, eqs), ``gens`` = (rays incl. points, lines); at least one given."""
        self.dims = tuple(dims)
        if len(self.dims) > MAX_DIMS:
            raise DimensionError(f"polyhedron with {len(self.dims)} dimensions exceeds the "
                                 f"limit of {MAX_DIMS}")
        self.empty = empty
        self._cons = cons
        self._gens = gens
        self._export = None
        if not empty:
            self._canonicalize()

    # representation management
    def _canonicalize(self):
        size = len(self.dims) + 1
        if self._gens is None:
            ineqs, eqs = self._cons
            rays, lines = double_description(list(ineqs) + [_positivity(size)], eqs, size)
            if not any(r[0] > 0 for r in rays):
                self.empty = True
                self._cons = self._gens = None
                return
            self._gens = (rays, lines)
        rays, lines = self._gens
        if not any(r[0] > 0 for r in rays):
            self.empty = True
            self._cons = self._gens = None
            return
        cineqs, ceqs = double_description(rays, lines, size)
        self._cons = (cineqs, ceqs)
        # minimal generators from the minimal constraints
        self._gens = double_description(cineqs, ceqs, size)

    @classmethod
    def top(cls, dims):
        return cls(dims, cons=([], []))

    @classmethod
    def bottom(cls, dims):
        return cls(dims, empty=True)

    def is_bottom(self):
        return self.empty

    @property
    def constraints(self):
        return self._cons

    @property
    def generators(self):
        return self._gens

    def affine_dim(self) -> int:
        if self.empty:
            return -1
        return len(self.dims) - len(self._cons[1])

    def bounds(self):
        rays, lines = self._gens
        out = {}
        for i, v in enumerate(self.dims, 1):
            pts = [Fraction(r[i], r[0]) for r in rays if r[0] > 0]
            lo = min(pts) if pts else None
            hi = max(pts) if pts else None
            if any(l[i] != 0 for l in lines):
                lo = hi = None
            if any(r[0] == 0 and r[i] < 0 for r in rays):
                lo = None
            if any(r[0] == 0 and r[i] > 0 for r in rays):
                hi = None
            out[v] = (lo, hi)
        return out

    # conversion helpers
    def _vec(self, c: Constraint) -> tuple[Vec, bool]:
        # expr <= 0  <=>  -expr >= 0
        e = c.expr
        idx = {v: i + 1 for i, v in enumerate(self.dims)}
        v = [Fraction(0)] * (len(self.dims) + 1)
        v[0] = -e.const
        for name, k in e.coeffs.items():
            if name not in idx:
                raise KeyError(f"constraint over unknown dimension {name}")
            v[idx[name]] = -k
        return _integer(v), c.kind == EQ

    def _sat(self, c: Vec, eq: bool) -> bool:
        """Do all generators satisfy constraint vector c?"""
        rays, lines = self._gens
        if any(_dot(c, l) != 0 for l in lines):
            return False
        if eq:
            return all(_dot(c, r) == 0 for r in rays)
        return all(_dot(c, r) >= 0 for r in rays)

    # lattice
    def join(self, other):
        self.check_dims(other)
        if self.empty:
            return other
        if other.empty:
            return self
        rays = list(dict.fromkeys(self._gens[0] + other._gens[0]))
        lines = self._gens[1] + other._gens[1]
        return Polyhedron(self.dims, gens=(rays, lines))

    def meet(self, other):
        self.check_dims(other)
        if self.empty or other.empty:
            return Polyhedron.bottom(self.dims)
        return Polyhedron(self.dims, cons=(self._cons[0] + other._cons[0],
                                           self._cons[1] + other._cons[1]))

    def meet_constraints(self, cs):
        if self.empty:
            return self
        ineqs, eqs = list(self._cons[0]), list(self._cons[1])
        added = False
        for c in cs:
            t = c.is_trivial()
            if t is True:
                continue
            if t is False:
                return Polyhedron.bottom(self.dims)
            v, is_eq = self._vec(c)
            if self._sat(v, is_eq):
                continue
            (eqs if is_eq else ineqs).append(v)
            added = True
        if not added:
            return self
        return Polyhedron(self.dims, cons=(ineqs, eqs))

    def widen(self, other):
        """Standard widening: the constraints of the left value that hold on the join.

        When the join has a larger affine dimension the join itself is returned; with
        equal dimensions, constraints of the join that define the same face of the left
        value as one of its constraints are kept as well.
        """
        self.check_dims(other)
        if self.empty:
            return other
        b = self.join(other)
        if b.affine_dim() > self.affine_dim():
            return b
        ineqs = [c for c in self._cons[0] if b._sat(c, False)]
        eqs = list(self._cons[1])
        a_rays = self._gens[0]
        faces = {frozenset(i for i, r in enumerate(a_rays) if _dot(c, r) == 0)
                 for c in self._cons[0]}
        for c in b._cons[0]:
            if c in ineqs or not self._sat(c, False):
                continue
            face = frozenset(i for i, r in enumerate(a_rays) if _dot(c, r) == 0)
            if face in faces:
                ineqs.append(c)
        return Polyhedron(self.dims, cons=(ineqs, eqs))

    def is_leq(self, other):
        self.check_dims(other)
        if self.empty:
            return True
        if other.empty:
            return False
        return (all(self._sat(c, False) for c in other._cons[0])
                and all(self._sat(c, True) for c in other._cons[1]))

    def to_constraints(self):
        if self.empty:
            return [Constraint(Linear.constant(1))]
        if self._export is None:
            self._export = self._export_constraints()
        return list(self._export)

    def _export_constraints(self):
        n = len(self.dims)
        eq_rows = [[Fraction(x) for x in c] for c in self._cons[1]]
        rows, pivots = _reduce_rows(eq_rows, n + 1)
        out = []
        for r in rows:
            out.append(self._to_constraint(r, EQ))
        ineqs = []
        for c in self._cons[0]:
            row = [Fraction(x) for x in c]
            for r, p in zip(rows, pivots):
                if row[p]:
                    f = row[p]
                    row = [x - f * y for x, y in zip(row, r)]
            con = self._to_constraint(row, LE)
            if con.is_trivial() is True:
                continue
            ineqs.append(con)
        ineqs = sorted(set(ineqs), key=_sort_key)
        out.sort(key=_sort_key)
        return out + ineqs

    def _to_constraint(self, row, kind) -> Constraint:
        e = Linear({v: -row[i + 1] for i, v in enumerate(self.dims)}, -row[0])
        return Constraint(e, kind)

    def contains(self, env):
        if self.empty:
            return False
        y = [1] + [env[v] for v in self.dims]
        if any(sum(a * b for a, b in zip(c, y)) != 0 for c in self._cons[1]):
            return False
        return all(sum(a * b for a, b in zip(c, y)) >= 0 for c in self._cons[0])

    def adapt_dims(self, new_dims):
        if self.empty:
            return Polyhedron.bottom(new_dims)
        if tuple(new_dims) == self.dims:
            return self
        old = {v: i + 1 for i, v in enumerate(self.dims)}
        src = [0] + [old.get(v) for v in new_dims]

        def proj(g):
            return [g[i] if i is not None else 0 for i in src]

        rays = [_normalize(proj(r)) for r in self._gens[0]]
        lines = [_normalize(proj(l)) for l in self._gens[1]]
        rays = [r for r in dict.fromkeys(rays) if any(r)]
        lines = [l for l in lines if any(l)]
        size = len(new_dims) + 1
        for k, v in enumerate(new_dims):
            if v not in old:
                lines.append(tuple(1 if i == k + 1 else 0 for i in range(size)))
        return Polyhedron(new_dims, gens=(rays, lines))

    def image(self, targets, exprs: Sequence[Optional[Linear]]):
        if self.empty:
            return Polyhedron.bottom(targets)
        idx = {v: i + 1 for i, v in enumerate(self.dims)}

        def apply(g, homogeneous_const):
            out = [Fraction(g[0])]
            for e in exprs:
                if e is None:
                    out.append(Fraction(0))
                    continue
                s = e.const * g[0] if homogeneous_const else Fraction(0)
                for v, k in e.coeffs.items():
                    s += k * g[idx[v]]
                out.append(s)
            return _integer(out)

        rays = [apply(r, True) for r in self._gens[0]]
        lines = [apply(l, False) for l in self._gens[1]]
        size = len(targets) + 1
        for k, e in enumerate(exprs):
            if e is None:
                lines.append(tuple(1 if i == k + 1 else 0 for i in range(size)))
        rays = [r for r in dict.fromkeys(rays) if any(r)]
        lines = [l for l in lines if any(l)]
        return Polyhedron(targets, gens=(rays, lines))

    def payload_size(self) -> int:
        if self.empty:
            return 0
        return len(self._cons[0]) + len(self._cons[1])


def _positivity(size: int) -> Vec:
    return tuple(1 if i == 0 else 0 for i in range(size))


def _sort_key(c: Constraint):
    return (sorted(c.expr.coeffs), str(c))
