"""A small closed expression grammar for scenario component functions.

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := ('-' | '+') factor | power
    power  := atom ('^' factor)?
    atom   := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

Names are coordinates, scenario parameters or ``pi``.  Expressions compile
to jax-traceable callables of the coordinate vector; nothing is executed
beyond the fixed operator table.
"""

from __future__ import annotations

import math
import re

import jax.numpy as jnp

from ..errors import ParseError

FUNCTIONS = {"sin": jnp.sin, "cos": jnp.cos, "exp": jnp.exp}
CONSTANTS = {"pi": math.pi}

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_][A-Za-z_0-9]*)|(.))")


def tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            break
        num, name, op = m.groups()
        start = m.start(m.lastindex) if m.lastindex else pos
        if num is not None:
            tokens.append(("num", float(num), start))
        elif name is not None:
            tokens.append(("name", name, start))
        elif op is not None:
            if op not in "+-*/^()":
                raise ParseError(f"unexpected character {op!r}", start, op)
            tokens.append(("op", op, start))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, text, names):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0
        self.names = names

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, op):
        tok = self.take()
        if tok[0] != "op" or tok[1] != op:
            raise ParseError(f"expected {op!r}, found {tok[1]!r}", tok[2], tok[1])

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected token {tok[1]!r}", tok[2], tok[1])
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = (op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = (op, node, self.factor())
        return node

    def factor(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] in "+-":
            self.take()
            inner = self.factor()
            return ("neg", inner) if tok[1] == "-" else inner
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return ("^", base, self.factor())
        return base

    def atom(self):
        tok = self.take()
        kind, val, pos = tok
        if kind == "num":
            return ("num", val)
        if kind == "name":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return ("call", val, arg)
            if val in self.names:
                return self.names[val]
            if val in CONSTANTS:
                return ("num", CONSTANTS[val])
            raise ParseError(f"unknown name {val!r}", pos, val)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise ParseError("unexpected end of expression", pos)
        raise ParseError(f"unexpected token {val!r}", pos, val)


def _evaluate(node, x):
    tag = node[0]
    if tag == "num":
        return node[1]
    if tag == "var":
        return x[node[1]]
    if tag == "neg":
        return -_evaluate(node[1], x)
    if tag == "call":
        return FUNCTIONS[node[1]](_evaluate(node[2], x))
    a, b = _evaluate(node[1], x), _evaluate(node[2], x)
    if tag == "+":
        return a + b
    if tag == "-":
        return a - b
    if tag == "*":
        return a * b
    if tag == "/":
        return a / b
    return a ** b


def parse(text: str, variables=(), parameters=None):
    """AST of ``text``; parameters are folded in as numbers."""
    names = {v: ("var", i) for i, v in enumerate(variables)}
    for k, v in (parameters or {}).items():
        if k in names:
            raise ParseError(f"parameter {k!r} shadows a coordinate", None, k)
        names[k] = ("num", float(v))
    return _Parser(str(text), names).parse()


def compile_expr(text, variables=(), parameters=None):
    """``x -> value`` for one expression (numbers pass straight through)."""
    if isinstance(text, (int, float)):
        value = float(text)
        return lambda x: value + 0.0 * x[0] if len(variables) else value
    node = parse(text, variables, parameters)
    return lambda x: jnp.asarray(_evaluate(node, x), dtype=float) + (0.0 * x[0] if len(variables) else 0.0)


def compile_array(texts, variables=(), parameters=None):
    """Nested lists of expressions -> ``x -> jnp.array`` of the same shape."""
    def build(obj):
        if isinstance(obj, (list, tuple)):
            if not obj:
                return lambda x: jnp.zeros(0)
            parts = [build(o) for o in obj]
            return lambda x: jnp.stack([p(x) for p in parts])
        return compile_expr(obj, variables, parameters)

    return build(texts)
