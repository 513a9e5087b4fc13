"""Products of intervals."""

from __future__ import annotations

from typing import Optional, Sequence

from ..linear import Constraint, Linear
from .base import AbstractValue, Bound, interval_ub, propagate, split_le


class Box(AbstractValue):
    domain = "box"

    def __init__(self, dims: Sequence[str], lo: Sequence[Bound], hi: Sequence[Bound], empty=False):
        self.dims = tuple(dims)
        self.lo = tuple(lo)
        self.hi = tuple(hi)
        self.empty = empty or any(l is not None and h is not None and l > h
                                  for l, h in zip(self.lo, self.hi))

    @classmethod
    def top(cls, dims):
        return cls(dims, [None] * len(dims), [None] * len(dims))

    @classmethod
    def bottom(cls, dims):
        return cls(dims, [None] * len(dims), [None] * len(dims), empty=True)

    def is_bottom(self):
        return self.empty

    def _maps(self):
        return dict(zip(self.dims, self.lo)), dict(zip(self.dims, self.hi))

    def interval(self, v: str) -> tuple[Bound, Bound]:
        i = self.dims.index(v)
        return self.lo[i], self.hi[i]

    def bounds(self):
        return {v: self.interval(v) for v in self.dims}

    def join(self, other):
        self.check_dims(other)
        if self.empty:
            return other
        if other.empty:
            return self
        lo = [None if a is None or b is None else min(a, b) for a, b in zip(self.lo, other.lo)]
        hi = [None if a is None or b is None else max(a, b) for a, b in zip(self.hi, other.hi)]
        return Box(self.dims, lo, hi)

    def meet(self, other):
        self.check_dims(other)
        if self.empty or other.empty:
            return Box.bottom(self.dims)
        lo = [b if a is None else a if b is None else max(a, b) for a, b in zip(self.lo, other.lo)]
        hi = [b if a is None else a if b is None else min(a, b) for a, b in zip(self.hi, other.hi)]
        return Box(self.dims, lo, hi)

    def meet_constraints(self, cs):
        if self.empty:
            return self
        forms = split_le(cs)
        if not forms:
            return self
        lo, hi = self._maps()
        if not propagate(lo, hi, forms):
            return Box.bottom(self.dims)
        return Box(self.dims, [lo[v] for v in self.dims], [hi[v] for v in self.dims])

    def widen(self, other):
        self.check_dims(other)
        if self.empty:
            return other
        other = self.join(other)
        lo = [a if a is not None and b is not None and b >= a else None
              for a, b in zip(self.lo, other.lo)]
        hi = [a if a is not None and b is not None and b <= a else None
              for a, b in zip(self.hi, other.hi)]
        return Box(self.dims, lo, hi)

    def is_leq(self, other):
        self.check_dims(other)
        if self.empty:
            return True
        if other.empty:
            return False
        for a, b in zip(self.lo, other.lo):
            if b is not None and (a is None or a < b):
                return False
        for a, b in zip(self.hi, other.hi):
            if b is not None and (a is None or a > b):
                return False
        return True

    def to_constraints(self):
        if self.empty:
            return [Constraint(Linear.constant(1))]
        out = []
        for v, l, h in zip(self.dims, self.lo, self.hi):
            if l is not None and l == h:
                out.append(Constraint.eq(Linear.var(v), l))
                continue
            if l is not None:
                out.append(Constraint.ge(Linear.var(v), l))
            if h is not None:
                out.append(Constraint.le(Linear.var(v), h))
        return out

    def contains(self, env):
        if self.empty:
            return False
        for v, l, h in zip(self.dims, self.lo, self.hi):
            x = env[v]
            if (l is not None and x < l) or (h is not None and x > h):
                return False
        return True

    def adapt_dims(self, new_dims):
        if self.empty:
            return Box.bottom(new_dims)
        lo, hi = self._maps()
        return Box(new_dims, [lo.get(v) for v in new_dims], [hi.get(v) for v in new_dims])

    def image(self, targets, exprs: Sequence[Optional[Linear]]):
        if self.empty:
            return Box.bottom(targets)
        lo_m, hi_m = self._maps()
        lo, hi = [], []
        for e in exprs:
            if e is None:
                lo.append(None)
                hi.append(None)
                continue
            h = interval_ub(e, lo_m, hi_m)
            l = interval_ub(-e, lo_m, hi_m)
            lo.append(None if l is None else -l)
            hi.append(h)
        return Box(targets, lo, hi)

    def payload_size(self) -> int:
        return 2 * len(self.dims)

