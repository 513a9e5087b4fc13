"""Minimal SMT-LIB 2 s-expression reading and value decoding."""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Union

SExpr = Union[str, list]

_TOKEN = re.compile(r'\s*(?:(\()|(\))|(\|[^|]*\|)|("(?:[^"]|"")*")|([^\s()|";]+)|(;[^\n]*))')


def tokenize(text: str) -> list[str]:
    out = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip() == "":
                break
            raise ValueError(f"cannot tokenize near {text[pos:pos + 20]!r}")
        pos = m.end()
        if m.group(6):
            continue
        tok = m.group(1) or m.group(2) or m.group(3) or m.group(4) or m.group(5)
        if tok:
            out.append(tok)
    return out


def parse_all(text: str) -> list[SExpr]:
    toks = tokenize(text)
    stack: list[list] = [[]]
    for t in toks:
        if t == "(":
            stack.append([])
        elif t == ")":
            if len(stack) == 1:
                raise ValueError("unbalanced ')'")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(t)
    if len(stack) != 1:
        raise ValueError("unbalanced '('")
    return stack[0]


def parse_one(text: str) -> SExpr:
    items = parse_all(text)
    if len(items) != 1:
        raise ValueError(f"expected one s-expression, got {len(items)}")
    return items[0]


def first_end(text: str) -> int:
    """End index of the first complete s-expression or atom in ``text``, or -1.

    A top-level atom counts as complete only once whitespace follows it.
    """
    depth = 0
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == "|":
            j = text.find("|", i + 1)
            if j < 0:
                return -1
            i = j + 1
        elif c == '"':
            j = i + 1
            while True:
                j = text.find('"', j)
                if j < 0:
                    return -1
                if j + 1 < n and text[j + 1] == '"':
                    j += 2
                    continue
                break
            i = j + 1
        elif c == ";":
            j = text.find("\n", i)
            if j < 0:
                return -1
            i = j + 1
            continue
        elif c == "(":
            depth += 1
            i += 1
            continue
        elif c == ")":
            depth -= 1
            i += 1
            if depth == 0:
                return i
            continue
        elif c.isspace():
            i += 1
            continue
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in '()|";':
                j += 1
            if depth == 0:
                return j if j < n else -1
            i = j
            continue
        if depth == 0:
            return i
    return -1


def decode_value(e: SExpr):
    """Bool, Int or Real model value -> bool or Fraction."""
    if isinstance(e, str):
        if e == "true":
            return True
        if e == "false":
            return False
        if re.fullmatch(r"\d+", e):
            return Fraction(int(e))
        if re.fullmatch(r"\d+\.\d*", e):
            return Fraction(e)
        raise ValueError(f"unsupported value {e!r}")
    if len(e) == 2 and e[0] == "-":
        return -decode_value(e[1])
    if len(e) == 3 and e[0] == "/":
        return decode_value(e[1]) / decode_value(e[2])
    if len(e) == 2 and e[0] == "to_real":
        return decode_value(e[1])
    raise ValueError(f"unsupported value {e!r}")


def unquote(sym: str) -> str:
    return sym[1:-1] if sym.startswith("|") and sym.endswith("|") else sym


def quote(name: str) -> str:
    if re.fullmatch(r"[A-Za-z_~!@$%^&*+=<>.?/-][A-Za-z0-9_~!@$%^&*+=<>.?/-]*", name) and "." not in name:
        return name
    return f"|{name}|"


def parse_model(text: str) -> dict[str, object]:
    """Values of the nullary ``define-fun`` entries of a ``(get-model)`` answer."""
    e = parse_one(text)
    if isinstance(e, str):
        raise ValueError("model is not a list")
    if e and e[0] == "model":
        e = e[1:]
    out = {}
    for d in e:
        if not isinstance(d, list) or not d or d[0] != "define-fun":
            continue
        if len(d) != 5 or d[2] != []:
            continue  # functions with arguments are not needed
        out[unquote(d[1])] = decode_value(d[4])
    return out
