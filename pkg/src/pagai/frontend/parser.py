"""Lexer, recursive-descent parser and type checker for ``.mimp`` sources."""

from __future__ import annotations

import re
from fractions import Fraction

from . import ast as A
from .ast import BOOL, INT, REAL, VOID


class SourceError(Exception):
    def __init__(self, message: str, pos: A.Pos = (0, 0)):
        self.message = message
        self.line, self.col = pos
        super().__init__(f"{self.line}:{self.col}: {message}")


class ParseError(SourceError):
    pass


class CheckError(SourceError):
    pass


KEYWORDS = {"int", "real", "void", "if", "else", "while", "for", "break", "continue",
            "return", "true", "false"}

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+|//[^\n]*|/\*.*?\*/)
  | (?P<nl>\n)
  | (?P<num>\d+\.\d*|\.\d+|\d+)
  | (?P<id>[A-Za-z_]\w*)
  | (?P<op>\+\+|--|\+=|-=|\*=|/=|<=|>=|==|!=|&&|\|\||<<|>>|[-+*/<>=!(){};,&|^~%])
""", re.VERBOSE | re.DOTALL)

_UNSUPPORTED = {"&", "|", "^", "~", "<<", ">>", "%"}


def tokenize(src: str):
    toks = []
    pos, line, col0 = 0, 1, 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if not m:
            raise ParseError(f"unexpected character {src[pos]!r}", (line, pos - col0 + 1))
        kind = m.lastgroup
        text = m.group()
        where = (line, pos - col0 + 1)
        if kind == "nl":
            line += 1
            col0 = m.end()
        elif kind == "ws":
            nls = text.count("\n")
            if nls:
                line += nls
                col0 = pos + text.rindex("\n") + 1
        else:
            if kind == "id" and text in KEYWORDS:
                kind = "kw"
            toks.append((kind, text, where))
        pos = m.end()
    toks.append(("eof", "", (line, pos - col0 + 1)))
    return toks


class Parser:
    def __init__(self, src: str):
        self.toks = tokenize(src)
        self.i = 0

    # token helpers
    def peek(self, k=0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text, k=0):
        t = self.peek(k)
        return t[0] in ("op", "kw") and t[1] == text

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text):
        t = self.next()
        if t[1] != text or t[0] not in ("op", "kw"):
            raise ParseError(f"expected {text!r}, found {t[1] or 'end of input'!r}", t[2])
        return t

    def ident(self):
        t = self.next()
        if t[0] != "id":
            raise ParseError(f"expected identifier, found {t[1] or 'end of input'!r}", t[2])
        return t

    # grammar
    def program(self) -> list[A.Function]:
        funcs = []
        while self.peek()[0] != "eof":
            funcs.append(self.function())
        return funcs

    def function(self) -> A.Function:
        t = self.next()
        if t[1] not in (INT, REAL, VOID):
            raise ParseError(f"expected function return type, found {t[1]!r}", t[2])
        name = self.ident()
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                pt = self.next()
                if pt[1] not in (INT, REAL):
                    raise ParseError("parameter type must be int or real", pt[2])
                params.append((pt[1], self.ident()[1]))
                if not self.at(","):
                    break
                self.next()
        self.expect(")")
        body = self.block()
        return A.Function(name[1], t[1], params, body, pos=t[2])

    def block(self) -> A.Block:
        t = self.expect("{")
        body = []
        while not self.at("}"):
            if self.peek()[0] == "eof":
                raise ParseError("unterminated block", t[2])
            body.extend(self.statement())
        self.next()
        return A.Block(body, pos=t[2])

    def statement(self) -> list[A.Stmt]:
        t = self.peek()
        kind, text, pos = t
        if kind == "kw" and text in (INT, REAL):
            out = self.declaration()
            self.expect(";")
            return out
        if self.at("{"):
            return [self.block()]
        if self.at(";"):
            self.next()
            return []
        if self.at("if"):
            self.next()
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            then = self.single()
            orelse = None
            if self.at("else"):
                self.next()
                orelse = self.single()
            return [A.If(cond, then, orelse, pos=pos)]
        if self.at("while"):
            self.next()
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            return [A.While(cond, self.single(), pos=pos)]
        if self.at("for"):
            self.next()
            self.expect("(")
            init = None
            if not self.at(";"):
                if self.peek()[1] in (INT, REAL) and self.peek()[0] == "kw":
                    decls = self.declaration()
                    init = decls[0] if len(decls) == 1 else A.Block(decls, pos=pos)
                else:
                    init = self.simple()
            self.expect(";")
            cond = None if self.at(";") else self.expr()
            self.expect(";")
            step = None if self.at(")") else self.simple()
            self.expect(")")
            body = self.single()
            loop = A.For(init, cond, step, body, pos=pos)
            # the init declaration is scoped to the loop
            return [A.Block([loop], pos=pos)]
        if self.at("break"):
            self.next()
            self.expect(";")
            return [A.Break(pos=pos)]
        if self.at("continue"):
            self.next()
            self.expect(";")
            return [A.Continue(pos=pos)]
        if self.at("return"):
            self.next()
            value = None if self.at(";") else self.expr()
            self.expect(";")
            return [A.Return(value, pos=pos)]
        if kind == "id" and text in ("assert", "assume") and self.at("(", 1):
            self.next()
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            self.expect(";")
            return [A.Assert(cond, pos=pos) if text == "assert" else A.Assume(cond, pos=pos)]
        s = self.simple()
        self.expect(";")
        return [s]

    def single(self) -> A.Stmt:
        pos = self.peek()[2]
        body = self.statement()
        return body[0] if len(body) == 1 and not isinstance(body[0], A.Decl) else A.Block(body, pos=pos)

    def declaration(self) -> list[A.Decl]:
        vtype = self.next()[1]
        out = []
        while True:
            name = self.ident()
            init = None
            if self.at("="):
                self.next()
                init = self.expr()
            out.append(A.Decl(vtype, name[1], init, pos=name[2]))
            if not self.at(","):
                return out
            self.next()

    def simple(self) -> A.Stmt:
        t = self.peek()
        if self.at("++") or self.at("--"):
            op = self.next()[1]
            name = self.ident()
            return self._incr(name, op)
        name = self.ident()
        if self.at("("):
            self.i -= 1
            call = self.primary()
            return A.ExprStmt(call, pos=t[2])
        op = self.next()
        if op[1] in ("++", "--"):
            return self._incr(name, op[1])
        if op[1] == "=":
            return A.Assign(name[1], self.expr(), pos=name[2])
        if op[1] in ("+=", "-=", "*=", "/="):
            rhs = self.expr()
            lhs = A.Name(name[1], pos=name[2])
            return A.Assign(name[1], A.Binary(op[1][0], lhs, rhs, pos=op[2]), pos=name[2])
        raise ParseError(f"unexpected {op[1]!r} in statement", op[2])

    def _incr(self, name, op):
        one = A.Num(Fraction(1), pos=name[2], type=INT)
        return A.Assign(name[1], A.Binary(op[0], A.Name(name[1], pos=name[2]), one, pos=name[2]),
                        pos=name[2])

    _LEVELS = [("||",), ("&&",), ("==", "!="), ("<", "<=", ">", ">="), ("+", "-"), ("*", "/")]

    def expr(self, level=0) -> A.Expr:
        if level == len(self._LEVELS):
            return self.unary()
        left = self.expr(level + 1)
        while True:
            t = self.peek()
            if t[0] == "op" and t[1] in _UNSUPPORTED:
                raise ParseError(f"unsupported operator {t[1]!r}", t[2])
            if t[0] == "op" and t[1] in self._LEVELS[level]:
                self.next()
                right = self.expr(level + 1)
                left = A.Binary(t[1], left, right, pos=t[2])
            else:
                return left

    def unary(self) -> A.Expr:
        t = self.peek()
        if t[0] == "op" and t[1] in ("-", "!"):
            self.next()
            return A.Unary(t[1], self.unary(), pos=t[2])
        if t[0] == "op" and t[1] in _UNSUPPORTED:
            raise ParseError(f"unsupported operator {t[1]!r}", t[2])
        return self.primary()

    def primary(self) -> A.Expr:
        kind, text, pos = self.next()
        if kind == "num":
            if "." in text:
                return A.Num(Fraction(text), pos=pos, type=REAL)
            return A.Num(Fraction(int(text)), pos=pos, type=INT)
        if kind == "kw" and text in ("true", "false"):
            return A.BoolLit(text == "true", pos=pos, type=BOOL)
        if kind == "id":
            if self.at("("):
                self.next()
                args = []
                if not self.at(")"):
                    while True:
                        args.append(self.expr())
                        if not self.at(","):
                            break
                        self.next()
                self.expect(")")
                return A.Call(text, args, pos=pos)
            return A.Name(text, pos=pos)
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(f"unexpected {text or 'end of input'!r} in expression", pos)


class Checker:
    """Resolves names to function-unique identifiers and assigns expression types."""

    def __init__(self, funcs: list[A.Function]):
        self.sigs = {}
        for f in funcs:
            if f.name in self.sigs or f.name in A.INTRINSICS:
                raise CheckError(f"duplicate function {f.name!r}", f.pos)
            self.sigs[f.name] = (f.ret_type, [t for t, _ in f.params])

    def function(self, f: A.Function):
        self.f = f
        self.scopes: list[dict[str, str]] = [{}]
        self.loop_depth = 0
        params = []
        for t, name in f.params:
            if name in self.scopes[0]:
                raise CheckError(f"duplicate parameter {name!r}", f.pos)
            uid = self.declare(name, t, f.pos[0], is_param=True)
            params.append((t, uid))
        f.params = params
        self.block(f.body, new_scope=False)

    def declare(self, name, vtype, line, is_param=False) -> str:
        uid = name
        k = 1
        while uid in self.f.vars:
            k += 1
            uid = f"{name}_{k}"
        self.f.vars[uid] = A.VarInfo(name, vtype, line, is_param)
        self.scopes[-1][name] = uid
        return uid

    def lookup(self, name, pos) -> str:
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        raise CheckError(f"undeclared variable {name}", pos)

    def block(self, b: A.Block, new_scope=True):
        if new_scope:
            self.scopes.append({})
        for s in b.body:
            self.stmt(s)
        if new_scope:
            self.scopes.pop()

    def stmt(self, s: A.Stmt):
        if isinstance(s, A.Block):
            self.block(s)
        elif isinstance(s, A.Decl):
            if s.name in self.scopes[-1]:
                raise CheckError(f"redeclaration of {s.name!r}", s.pos)
            if s.init is not None:
                self.assignable(s.vtype, self.expr(s.init), s.init.pos)
            s.name = self.declare(s.name, s.vtype, s.pos[0])
        elif isinstance(s, A.Assign):
            s.name = self.lookup(s.name, s.pos)
            self.assignable(self.f.vars[s.name].type, self.expr(s.value), s.pos)
        elif isinstance(s, A.If):
            self.cond(s.cond)
            self.scoped(s.then)
            if s.orelse is not None:
                self.scoped(s.orelse)
        elif isinstance(s, A.While):
            self.cond(s.cond)
            self.loop_depth += 1
            self.scoped(s.body)
            self.loop_depth -= 1
        elif isinstance(s, A.For):
            if s.init is not None:
                self.stmt(s.init)
            if s.cond is not None:
                self.cond(s.cond)
            self.loop_depth += 1
            self.scoped(s.body)
            self.loop_depth -= 1
            if s.step is not None:
                self.stmt(s.step)
        elif isinstance(s, (A.Break, A.Continue)):
            if not self.loop_depth:
                raise CheckError(f"{type(s).__name__.lower()} outside loop", s.pos)
        elif isinstance(s, A.Return):
            rt = self.f.ret_type
            if s.value is None:
                if rt != VOID:
                    raise CheckError("missing return value", s.pos)
            else:
                if rt == VOID:
                    raise CheckError("void function returns a value", s.pos)
                self.assignable(rt, self.expr(s.value), s.pos)
        elif isinstance(s, (A.Assert, A.Assume)):
            self.cond(s.cond)
        elif isinstance(s, A.ExprStmt):
            if not isinstance(s.expr, A.Call):
                raise CheckError("expression statement must be a call", s.pos)
            self.expr(s.expr, allow_void=True)
        else:  # pragma: no cover
            raise CheckError(f"unexpected statement {type(s).__name__}", s.pos)

    def scoped(self, s):
        self.scopes.append({})
        self.stmt(s)
        self.scopes.pop()

    def assignable(self, target, value, pos):
        if value == BOOL:
            raise CheckError("cannot assign a boolean to a numeric variable", pos)
        if value == VOID:
            raise CheckError("void value used", pos)
        if target == INT and value == REAL:
            raise CheckError("type mismatch: cannot assign real to int", pos)

    def cond(self, e):
        if self.expr(e) != BOOL:
            raise CheckError("condition must be boolean", e.pos)

    def expr(self, e: A.Expr, allow_void=False) -> str:
        t = self._expr(e, allow_void)
        e.type = t
        return t

    def _expr(self, e, allow_void):
        if isinstance(e, A.Num):
            return e.type
        if isinstance(e, A.BoolLit):
            return BOOL
        if isinstance(e, A.Name):
            e.name = self.lookup(e.name, e.pos)
            return self.f.vars[e.name].type
        if isinstance(e, A.Unary):
            t = self.expr(e.operand)
            if e.op == "!":
                if t != BOOL:
                    raise CheckError("'!' needs a boolean operand", e.pos)
                return BOOL
            if t not in (INT, REAL):
                raise CheckError("'-' needs a numeric operand", e.pos)
            return t
        if isinstance(e, A.Binary):
            lt, rt = self.expr(e.left), self.expr(e.right)
            if e.op in ("&&", "||"):
                if lt != BOOL or rt != BOOL:
                    raise CheckError(f"{e.op!r} needs boolean operands", e.pos)
                return BOOL
            if lt not in (INT, REAL) or rt not in (INT, REAL):
                raise CheckError(f"{e.op!r} needs numeric operands", e.pos)
            if e.op in ("<", "<=", ">", ">=", "==", "!="):
                return BOOL
            return REAL if REAL in (lt, rt) else INT
        if isinstance(e, A.Call):
            if e.func in ("nondet_int", "nondet_real"):
                if e.args:
                    raise CheckError(f"{e.func} takes no arguments", e.pos)
                return INT if e.func == "nondet_int" else REAL
            if e.func in ("assert", "assume"):
                raise CheckError(f"{e.func} is a statement", e.pos)
            if e.func not in self.sigs:
                raise CheckError(f"undeclared function {e.func}", e.pos)
            ret, ptypes = self.sigs[e.func]
            if len(ptypes) != len(e.args):
                raise CheckError(f"{e.func} expects {len(ptypes)} arguments", e.pos)
            for pt, a in zip(ptypes, e.args):
                self.assignable(pt, self.expr(a), a.pos)
            if ret == VOID and not allow_void:
                raise CheckError(f"void function {e.func} used as a value", e.pos)
            return ret
        raise CheckError("bad expression", e.pos)  # pragma: no cover


def parse(source: str) -> A.Program:
    """Parse and type-check a program; raises :class:`SourceError` subclasses."""
    funcs = Parser(source).program()
    mains = [f for f in funcs if f.name == "main"]
    if len(mains) != 1:
        raise CheckError("program must define exactly one function named main", (1, 1))
    checker = Checker(funcs)
    for f in funcs:
        checker.function(f)
    return A.Program(funcs, source)
