"""Syntax tree of the mini imperative language (``.mimp``)."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

Pos = tuple[int, int]

INT = "int"
REAL = "real"
BOOL = "bool"
VOID = "void"


@dataclass
class Expr:
    pos: Pos = field(default=(0, 0), kw_only=True, compare=False)
    type: Optional[str] = field(default=None, kw_only=True, compare=False)


@dataclass
class Num(Expr):
    value: Fraction


@dataclass
class BoolLit(Expr):
    value: bool


@dataclass
class Name(Expr):
    name: str


@dataclass
class Unary(Expr):
    op: str  # '-' or '!'
    operand: Expr


@dataclass
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass
class Call(Expr):
    func: str
    args: list[Expr]


@dataclass
class Stmt:
    pos: Pos = field(default=(0, 0), kw_only=True, compare=False)


@dataclass
class Decl(Stmt):
    vtype: str
    name: str
    init: Optional[Expr] = None


@dataclass
class Assign(Stmt):
    name: str
    value: Expr


@dataclass
class If(Stmt):
    cond: Expr
    then: Stmt
    orelse: Optional[Stmt] = None


@dataclass
class While(Stmt):
    cond: Expr
    body: Stmt


@dataclass
class For(Stmt):
    init: Optional[Stmt]
    cond: Optional[Expr]
    step: Optional[Stmt]
    body: Stmt


@dataclass
class Break(Stmt):
    pass


@dataclass
class Continue(Stmt):
    pass


@dataclass
class Return(Stmt):
    value: Optional[Expr] = None


@dataclass
class Assert(Stmt):
    cond: Expr


@dataclass
class Assume(Stmt):
    cond: Expr


@dataclass
class ExprStmt(Stmt):
    expr: Expr


@dataclass
class Block(Stmt):
    body: list[Stmt]


@dataclass
class Inlined(Stmt):
    """Body of an inlined call; ``return e`` inside assigns ``result`` and leaves the body."""
    callee: str
    result: Optional[str]
    body: Block


@dataclass
class VarInfo:
    name: str  # source-level name
    type: str
    line: int
    is_param: bool = False


@dataclass
class Function:
    name: str
    ret_type: str
    params: list[tuple[str, str]]  # (type, unique name)
    body: Block
    pos: Pos = (0, 0)
    vars: dict[str, VarInfo] = field(default_factory=dict)

    @property
    def locals(self) -> list[str]:
        return [v for v, info in self.vars.items() if not info.is_param and not v.startswith("__")]


@dataclass
class Program:
    functions: list[Function]
    source: str = ""

    def function(self, name: str) -> Function:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    @property
    def main(self) -> Function:
        return self.function("main")


INTRINSICS = ("assert", "assume", "nondet_int", "nondet_real")
