"""Affine expressions and constraints with exact rational coefficients."""

from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Iterable, Mapping

LE = "<="
EQ = "=="


def _frac(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


class Linear:
    """``sum(coeffs[v] * v) + const``. Immutable; zero coefficients are dropped."""

    __slots__ = ("coeffs", "const", "_hash")

    def __init__(self, coeffs: Mapping[str, Fraction] | None = None, const=0):
        c = {}
        if coeffs:
            for v, k in coeffs.items():
                if k:
                    c[v] = _frac(k)
        self.coeffs: dict[str, Fraction] = c
        self.const: Fraction = _frac(const)
        self._hash = None

    @classmethod
    def var(cls, name: str, coeff=1) -> Linear:
        return cls({name: coeff})

    @classmethod
    def constant(cls, value) -> Linear:
        return cls(None, value)

    def is_const(self) -> bool:
        return not self.coeffs

    def vars(self) -> set[str]:
        return set(self.coeffs)

    def __add__(self, other) -> Linear:
        if not isinstance(other, Linear):
            return Linear(self.coeffs, self.const + _frac(other))
        c = dict(self.coeffs)
        for v, k in other.coeffs.items():
            c[v] = c.get(v, 0) + k
        return Linear(c, self.const + other.const)

    __radd__ = __add__

    def __neg__(self) -> Linear:
        return Linear({v: -k for v, k in self.coeffs.items()}, -self.const)

    def __sub__(self, other) -> Linear:
        return self + (-other if isinstance(other, Linear) else -_frac(other))

    def __rsub__(self, other) -> Linear:
        return (-self) + other

    def scale(self, k) -> Linear:
        k = _frac(k)
        return Linear({v: c * k for v, c in self.coeffs.items()}, self.const * k)

    def __mul__(self, k) -> Linear:
        return self.scale(k)

    __rmul__ = __mul__

    def evaluate(self, env: Mapping[str, Fraction]) -> Fraction:
        total = self.const
        for v, k in self.coeffs.items():
            total += k * env[v]
        return total

    def substitute(self, mapping: Mapping[str, Linear]) -> Linear:
        out = Linear(None, self.const)
        for v, k in self.coeffs.items():
            out = out + (mapping[v].scale(k) if v in mapping else Linear({v: k}))
        return out

    def rename(self, mapping: Mapping[str, str]) -> Linear:
        c: dict[str, Fraction] = {}
        for v, k in self.coeffs.items():
            n = mapping.get(v, v)
            c[n] = c.get(n, 0) + k
        return Linear(c, self.const)

    def __eq__(self, other) -> bool:
        return (isinstance(other, Linear) and self.coeffs == other.coeffs
                and self.const == other.const)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((frozenset(self.coeffs.items()), self.const))
        return self._hash

    def __repr__(self):
        return f"Linear({format_affine(self)})"


def _fmt_num(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def format_affine(e: Linear) -> str:
    parts = []
    for v in sorted(e.coeffs):
        k = e.coeffs[v]
        mag = abs(k)
        term = v if mag == 1 else f"{_fmt_num(mag)}*{v}"
        if not parts:
            parts.append(term if k > 0 else f"-{term}")
        else:
            parts.append(f"+ {term}" if k > 0 else f"- {term}")
    if e.const or not parts:
        if not parts:
            parts.append(_fmt_num(e.const))
        else:
            parts.append(f"+ {_fmt_num(e.const)}" if e.const > 0 else f"- {_fmt_num(-e.const)}")
    return " ".join(parts)


class Constraint:
    """``expr <= 0`` or ``expr == 0``, kept in a normalized integer form."""

    __slots__ = ("expr", "kind")

    def __init__(self, expr: Linear, kind: str = LE):
        if kind not in (LE, EQ):
            raise ValueError(f"bad constraint kind {kind!r}")
        self.expr = _normalize(expr, kind)
        self.kind = kind

    @classmethod
    def le(cls, lhs: Linear, rhs) -> Constraint:
        return cls(lhs - rhs, LE)

    @classmethod
    def ge(cls, lhs: Linear, rhs) -> Constraint:
        return cls((rhs if isinstance(rhs, Linear) else Linear.constant(rhs)) - lhs, LE)

    @classmethod
    def eq(cls, lhs: Linear, rhs) -> Constraint:
        return cls(lhs - rhs, EQ)

    def vars(self) -> set[str]:
        return self.expr.vars()

    def is_trivial(self) -> bool | None:
        """True if always satisfied, False if never, None if it mentions variables."""
        if self.expr.coeffs:
            return None
        c = self.expr.const
        return c == 0 if self.kind == EQ else c <= 0

    def holds(self, env: Mapping[str, Fraction]) -> bool:
        v = self.expr.evaluate(env)
        return v == 0 if self.kind == EQ else v <= 0

    def negations(self) -> list[Constraint]:
        """Disjuncts of the negation, relaxed to non-strict form over the rationals."""
        if self.kind == EQ:
            return [Constraint(-self.expr, LE), Constraint(self.expr, LE)]
        return [Constraint(-self.expr, LE)]

    def rename(self, mapping) -> Constraint:
        return Constraint(self.expr.rename(mapping), self.kind)

    def substitute(self, mapping) -> Constraint:
        return Constraint(self.expr.substitute(mapping), self.kind)

    def __eq__(self, other):
        return isinstance(other, Constraint) and self.kind == other.kind and self.expr == other.expr

    def __hash__(self):
        return hash((self.expr, self.kind))

    def __str__(self):
        lhs = Linear(self.expr.coeffs)
        rhs = -self.expr.const
        op = "=" if self.kind == EQ else "<="
        if not lhs.coeffs:
            return f"0 {op} {_fmt_num(rhs)}"
        return f"{format_affine(lhs)} {op} {_fmt_num(rhs)}"

    __repr__ = __str__


def _normalize(expr: Linear, kind: str) -> Linear:
    nums = list(expr.coeffs.values())
    if not nums:
        return expr
    den = 1
    for q in nums + [expr.const]:
        den = den * q.denominator // math.gcd(den, q.denominator)
    ints = [int(q * den) for q in nums]
    g = 0
    for i in ints + [int(expr.const * den)]:
        g = math.gcd(g, i)
    k = Fraction(den, g or 1)
    if kind == EQ:
        first = expr.coeffs[min(expr.coeffs)]
        if first < 0:
            k = -k
    return expr.scale(k)


BOTTOM_CONSTRAINT = Constraint(Linear.constant(1), LE)  # 0 <= -1


def evaluate_all(cs: Iterable[Constraint], env) -> bool:
    return all(c.holds(env) for c in cs)


_TOKEN = re.compile(r"\s*(?:(?P<num>\d+(?:/\d+)?)|(?P<name>[A-Za-z_][\w.@#']*)|(?P<op><=|>=|==|=|[-+*]))")


def parse_constraint(text: str) -> Constraint:
    """Parse the printed form, e.g. ``2*x - y <= 3/2`` or ``x = 0``."""
    pos = 0
    toks = []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse constraint {text!r} at {pos}")
        pos = m.end()
        for kind in ("num", "name", "op"):
            if m.group(kind) is not None:
                toks.append((kind, m.group(kind)))
    rel = [i for i, (k, t) in enumerate(toks) if k == "op" and t in ("<=", ">=", "==", "=")]
    if len(rel) != 1:
        raise ValueError(f"expected one relation in {text!r}")
    i = rel[0]
    lhs = _parse_sum(toks[:i], text)
    rhs = _parse_sum(toks[i + 1:], text)
    op = toks[i][1]
    if op == "<=":
        return Constraint(lhs - rhs, LE)
    if op == ">=":
        return Constraint(rhs - lhs, LE)
    return Constraint(lhs - rhs, EQ)


def _parse_sum(toks, text) -> Linear:
    out = Linear()
    sign = 1
    i = 0
    expect_term = True
    while i < len(toks):
        kind, t = toks[i]
        if kind == "op" and t in "+-":
            if t == "-":
                sign = -sign
            i += 1
            continue
        if kind == "num":
            k = Fraction(t)
            if i + 2 < len(toks) + 1 and i + 1 < len(toks) and toks[i + 1] == ("op", "*"):
                name = toks[i + 2][1]
                out = out + Linear.var(name, sign * k)
                i += 3
            else:
                out = out + sign * k
                i += 1
        elif kind == "name":
            out = out + Linear.var(t, sign)
            i += 1
        else:
            raise ValueError(f"unexpected {t!r} in {text!r}")
        sign = 1
        expect_term = False
    if expect_term:
        raise ValueError(f"empty side in {text!r}")
    return out
