"""A small S-expression reader shared by the problem, SMT and SyGuS front ends."""

from __future__ import annotations


class SexprError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        self.line, self.col = line, col
        super().__init__("%d:%d: %s" % (line, col, msg) if line else msg)


class Sym(str):
    """An atom token with its source position (compares as a plain str)."""

    line: int
    col: int

    def __new__(cls, text: str, line: int = 0, col: int = 0):
        s = super().__new__(cls, text)
        s.line, s.col = line, col
        return s


class SList(list):
    """A parenthesised list with its source position."""

    def __init__(self, items=(), line: int = 0, col: int = 0):
        super().__init__(items)
        self.line, self.col = line, col


def parse_all(text: str) -> list:
    """Parse every top-level S-expression in ``text``."""
    out = []
    stack: list[SList] = []
    i, n = 0, len(text)
    line, col = 1, 1

    def advance(k: int) -> None:
        nonlocal i, line, col
        for ch in text[i:i + k]:
            if ch == "\n":
                line, col = line + 1, 1
            else:
                col += 1
        i += k

    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            advance(1)
        elif ch == ";":
            j = text.find("\n", i)
            advance((n if j < 0 else j) - i)
        elif ch == "(":
            stack.append(SList(line=line, col=col))
            advance(1)
        elif ch == ")":
            if not stack:
                raise SexprError("unbalanced ')'", line, col)
            done = stack.pop()
            advance(1)
            (stack[-1] if stack else out).append(done)
        elif ch == '"':
            j = i + 1
            while j < n and text[j] != '"':
                j += 2 if text[j] == "\\" else 1
            if j >= n:
                raise SexprError("unterminated string", line, col)
            tok = Sym(text[i:j + 1], line, col)
            advance(j + 1 - i)
            (stack[-1] if stack else out).append(tok)
        elif ch == "|":
            j = text.find("|", i + 1)
            if j < 0:
                raise SexprError("unterminated quoted symbol", line, col)
            tok = Sym(text[i:j + 1], line, col)
            advance(j + 1 - i)
            (stack[-1] if stack else out).append(tok)
        else:
            j = i
            while j < n and text[j] not in " \t\r\n();\"|":
                j += 1
            tok = Sym(text[i:j], line, col)
            advance(j - i)
            (stack[-1] if stack else out).append(tok)
    if stack:
        raise SexprError("unbalanced '(' opened here", stack[-1].line, stack[-1].col)
    return out


def parse_one(text: str):
    items = parse_all(text)
    if len(items) != 1:
        raise SexprError("expected exactly one S-expression, got %d" % len(items))
    return items[0]


def dumps(x) -> str:
    if isinstance(x, list):
        return "(" + " ".join(dumps(e) for e in x) + ")"
    return str(x)


def position(x) -> tuple:
    return (getattr(x, "line", 0), getattr(x, "col", 0))
