"""Common interface of the abstract domains."""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Optional, Sequence

from ..linear import EQ, Constraint, Linear

Bound = Optional[Fraction]  # None is an infinite bound


class DimensionError(ValueError):
    pass


class AbstractValue:
    """An element of a numerical abstract domain over the ordered ``dims``.

    Values are immutable; every operation returns a fresh value.
    """

    domain = "?"
    dims: tuple[str, ...]

    # construction
    @classmethod
    def top(cls, dims: Sequence[str]) -> "AbstractValue":
        raise NotImplementedError

    @classmethod
    def bottom(cls, dims: Sequence[str]) -> "AbstractValue":
        raise NotImplementedError

    @classmethod
    def from_constraints(cls, dims, cs: Iterable[Constraint]) -> "AbstractValue":
        return cls.top(dims).meet_constraints(cs)

    # lattice
    def is_bottom(self) -> bool:
        raise NotImplementedError

    def is_top(self) -> bool:
        return not self.is_bottom() and not self.to_constraints()

    def join(self, other):
        raise NotImplementedError

    def meet(self, other):
        return self.meet_constraints(other.to_constraints())

    def meet_constraints(self, cs: Iterable[Constraint]):
        raise NotImplementedError

    def widen(self, other):
        raise NotImplementedError

    def is_leq(self, other) -> bool:
        raise NotImplementedError

    def equals(self, other) -> bool:
        return self.is_leq(other) and other.is_leq(self)

    def to_constraints(self) -> list[Constraint]:
        raise NotImplementedError

    def adapt_dims(self, new_dims: Sequence[str]):
        raise NotImplementedError

    def image(self, targets: Sequence[str], exprs: Sequence[Optional[Linear]]):
        """Simultaneous assignment; result dims are ``targets`` (``None`` = havoc)."""
        raise NotImplementedError

    def bounds(self) -> dict[str, tuple[Bound, Bound]]:
        """Bounding box (``None`` = unbounded); undefined on bottom."""
        lo = {v: None for v in self.dims}
        hi = {v: None for v in self.dims}
        propagate(lo, hi, split_le(self.to_constraints()))
        return {v: (lo[v], hi[v]) for v in self.dims}

    # derived
    def transfer(self, pa) -> "AbstractValue":
        """Apply a parallel assignment (see :class:`pagai.ir.ParallelAssign`)."""
        if list(pa.src) != list(self.dims):
            raise ValueError(f"transfer source dims {pa.src} != {list(self.dims)}")
        if self.is_bottom() or pa.infeasible():
            return self.bottom(pa.targets)
        v = self.adapt_dims(list(pa.src) + list(pa.fresh)) if pa.fresh else self
        if pa.guards:
            v = v.meet_constraints(pa.guards)
        if v.is_bottom():
            return self.bottom(pa.targets)
        return v.image(pa.targets, pa.exprs)

    def contains(self, env) -> bool:
        if self.is_bottom():
            return False
        return all(c.holds(env) for c in self.to_constraints())

    def check_dims(self, other):
        if self.domain != other.domain or tuple(self.dims) != tuple(other.dims):
            raise ValueError(f"incompatible values: {self.domain}{list(self.dims)} vs "
                             f"{other.domain}{list(other.dims)}")

    def __str__(self):
        if self.is_bottom():
            return "bottom"
        cs = self.to_constraints()
        return "top" if not cs else " and ".join(str(c) for c in cs)

    def __repr__(self):
        return f"<{self.domain} {list(self.dims)}: {self}>"


def split_le(cs: Iterable[Constraint]) -> list[Linear]:
    """Constraints as a list of ``expr <= 0`` forms (equalities give two)."""
    out = []
    for c in cs:
        out.append(c.expr)
        if c.kind == EQ:
            out.append(-c.expr)
    return out


def bound_add(a: Bound, b: Bound) -> Bound:
    return None if a is None or b is None else a + b


def bound_min(a: Bound, b: Bound) -> Bound:
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


def bound_max(a: Bound, b: Bound) -> Bound:
    """Maximum of two upper bounds (None = +infinity)."""
    return None if a is None or b is None else max(a, b)


def interval_ub(e: Linear, lo: dict, hi: dict) -> Bound:
    """Upper bound of ``e`` given per-variable bounds (missing = infinite)."""
    total = e.const
    for v, k in e.coeffs.items():
        b = hi.get(v) if k > 0 else lo.get(v)
        if b is None:
            return None
        total += k * b
    return total


def propagate(lo: dict, hi: dict, forms: list[Linear], rounds=8) -> bool:
    """Tighten per-variable bounds with ``form <= 0`` constraints (interval propagation).

    Mutates ``lo``/``hi``; returns False if infeasibility is detected.
    """
    for _ in range(rounds):
        changed = False
        for f in forms:
            if not f.coeffs:
                if f.const > 0:
                    return False
                continue
            # a_i x_i <= -const - sum_{j != i} a_j x_j
            rest_lb = f.const
            inf_count = 0
            inf_var = None
            parts = {}
            for v, k in f.coeffs.items():
                b = lo.get(v) if k > 0 else hi.get(v)
                if b is None:
                    inf_count += 1
                    inf_var = v
                else:
                    parts[v] = k * b
                    rest_lb += k * b
            if inf_count > 1:
                continue
            for v, k in f.coeffs.items():
                if inf_count == 1 and v != inf_var:
                    continue
                others = rest_lb - parts.get(v, 0)
                bound = -others / k
                if k > 0:
                    if hi.get(v) is None or bound < hi[v]:
                        hi[v] = bound
                        changed = True
                else:
                    if lo.get(v) is None or bound > lo[v]:
                        lo[v] = bound
                        changed = True
                if lo.get(v) is not None and hi.get(v) is not None and lo[v] > hi[v]:
                    return False
        if not changed:
            break
    return True
