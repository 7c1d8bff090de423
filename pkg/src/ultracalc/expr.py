"""Arithmetic expressions over ``t, x, y, z, u`` (and ``r = |position|``).

Grammar (``^`` is right-associative and binds tighter than unary minus)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := ("+" | "-") unary | power
    power   := atom ("^" unary)?
    atom    := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"
    FUNC    := abs | sin | cos | exp

Evaluation is vectorised with numpy.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

VARIABLES = ("t", "x", "y", "z", "u", "r")
FUNCTIONS = {"abs": np.abs, "sin": np.sin, "cos": np.cos, "exp": np.exp}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


class ExpressionError(ValueError):
    def __init__(self, message: str, source: str, position: int):
        self.source = source
        self.position = position
        pointer = " " * position + "^"
        super().__init__(f"{message} at position {position}\n  {source}\n  {pointer}")


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            bad = pos + len(source[pos:]) - len(source[pos:].lstrip())
            raise ExpressionError(f"unexpected character {source[bad]!r}", source, bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append(Token(kind, m.group(kind), start))
        pos = m.end()
    tokens.append(Token("end", "", len(source)))
    return tokens


# AST nodes are plain tuples: ("num", value) | ("var", name) | ("neg", node)
# | ("call", name, node) | (op, left, right)


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = tokenize(source)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> None:
        if self.tok.text != text:
            found = repr(self.tok.text) if self.tok.kind != "end" else "end of input"
            raise ExpressionError(f"expected {text!r}, found {found}", self.source, self.tok.pos)
        self.advance()

    def parse(self):
        node = self.expr()
        if self.tok.kind != "end":
            raise ExpressionError(f"unexpected {self.tok.text!r}", self.source, self.tok.pos)
        return node

    def expr(self):
        node = self.term()
        while self.tok.text in ("+", "-"):
            op = self.advance().text
            node = (op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok.text in ("*", "/"):
            op = self.advance().text
            node = (op, node, self.unary())
        return node

    def unary(self):
        if self.tok.text == "-":
            self.advance()
            return ("neg", self.unary())
        if self.tok.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok.text == "^":
            self.advance()
            return ("^", base, self.unary())
        return base

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return ("num", float(tok.text))
        if tok.kind == "name":
            self.advance()
            if tok.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return ("call", tok.text, arg)
            if tok.text in VARIABLES:
                return ("var", tok.text)
            raise ExpressionError(f"unknown name {tok.text!r}", self.source, tok.pos)
        if tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        found = repr(tok.text) if tok.kind != "end" else "end of input"
        raise ExpressionError(f"unexpected {found}", self.source, tok.pos)


def _eval(node, env):
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "var":
        try:
            return env[node[1]]
        except KeyError:
            raise NameError(f"variable {node[1]!r} is not available here") from None
    if kind == "neg":
        return -_eval(node[1], env)
    if kind == "call":
        return FUNCTIONS[node[1]](_eval(node[2], env))
    left, right = _eval(node[1], env), _eval(node[2], env)
    if kind == "+":
        return left + right
    if kind == "-":
        return left - right
    if kind == "*":
        return left * right
    if kind == "/":
        return np.divide(left, right)
    return np.power(left, right)


def _names(node) -> set[str]:
    if node[0] == "var":
        return {node[1]}
    if node[0] == "num":
        return set()
    return set().union(*(_names(n) for n in node[1:] if isinstance(n, tuple)))


class Expression:
    """A parsed expression; call with keyword arrays or use the adapters below."""

    def __init__(self, source: str):
        self.source = source
        self.tree = _Parser(source).parse()
        self.names = frozenset(_names(self.tree))

    def __repr__(self) -> str:
        return f"Expression({self.source!r})"

    def __call__(self, **env):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return _eval(self.tree, env)

    def point_function(self, t: float = 0.0):
        """Adapter to the ``f(points)`` convention; points have shape ``(..., dim)``."""
        expr = self

        def f(points):
            points = np.asarray(points, dtype=float)
            env = {"t": t, "u": 0.0}
            for name, a in zip(("x", "y", "z"), range(points.shape[-1])):
                env[name] = points[..., a]
            env["r"] = np.sqrt(np.sum(points**2, axis=-1))
            value = expr(**env)
            return np.broadcast_to(np.asarray(value, dtype=float), points.shape[:-1])

        f.source = self.source
        return f

    def flux_function(self):
        """Adapter to the ``F(t, x, u)`` convention used by flux models."""
        expr = self

        def F(t, x, u):
            x = np.asarray(x, dtype=float)
            env = {"t": t, "u": u, "r": np.sqrt(np.sum(x**2, axis=-1))}
            for name, a in zip(("x", "y", "z"), range(x.shape[-1])):
                env[name] = x[..., a]
            return np.broadcast_to(np.asarray(expr(**env), dtype=float), np.shape(u))

        F.source = self.source
        return F


def parse(source: str) -> Expression:
    return Expression(source)
