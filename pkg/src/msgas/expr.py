"""Scalar expression mini-language used by scenario files.

Grammar (LL(1), whitespace-insensitive)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?
    primary := NUMBER | IDENT | FUNC '(' args ')' | '(' expr ')'

``^`` is right-associative and binds tighter than unary minus, so
``-2^2 == -4`` and ``2^3^2 == 512``. Identifiers are ``m1..m3``, ``x1..x3``,
``t`` and the constant ``pi``; functions are sin, cos, exp, tanh, sqrt, log.
Errors carry the 1-based column of the offending token.
"""

import math
import re
from dataclasses import dataclass

import numpy as np

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "tanh": np.tanh,
    "sqrt": np.sqrt,
    "log": np.log,
}
VARIABLES = ("m1", "m2", "m3", "x1", "x2", "x3", "t")
CONSTANTS = {"pi": math.pi}


class ExprError(ValueError):
    def __init__(self, message, col, text=None):
        self.message = message
        self.col = col
        self.text = text
        super().__init__(f"column {col}: {message}")


@dataclass(frozen=True)
class Num:
    value: float
    col: int = 0


@dataclass(frozen=True)
class Var:
    name: str
    col: int = 0


@dataclass(frozen=True)
class Neg:
    operand: object
    col: int = 0


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object
    col: int = 0


@dataclass(frozen=True)
class Call:
    func: str
    arg: object
    col: int = 0


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        mt = _TOKEN.match(text, pos)
        if mt is None or mt.end() == pos:
            raise ExprError(f"unexpected character {text[pos]!r}", pos + 1, text)
        kind = mt.lastgroup
        start = mt.start(kind)
        tokens.append((kind, mt.group(kind), start + 1))
        pos = mt.end()
    tokens.append(("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text, allowed):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.allowed = allowed

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        raise ExprError(message, tok[2], self.text)

    def expect(self, value):
        tok = self.peek()
        if tok[1] != value or tok[0] != "op":
            found = "end of input" if tok[0] == "end" else repr(tok[1])
            self.error(f"expected {value!r}, found {found}")
        return self.take()

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            if tok[1] == ")":
                self.error("unbalanced ')'")
            self.error(f"unexpected {tok[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            tok = self.take()
            node = BinOp(tok[1], node, self.term(), tok[2])
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            tok = self.take()
            node = BinOp(tok[1], node, self.unary(), tok[2])
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.take()
            return Neg(self.unary(), tok[2])
        return self.power()

    def power(self):
        base = self.primary()
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "^":
            self.take()
            return BinOp("^", base, self.unary(), tok[2])
        return base

    def primary(self):
        tok = self.peek()
        kind, value, col = tok
        if kind == "num":
            self.take()
            return Num(float(value), col)
        if kind == "ident":
            self.take()
            if value in FUNCTIONS:
                if not (self.peek()[0] == "op" and self.peek()[1] == "("):
                    self.error(f"function {value!r} must be called with parentheses")
                self.take()
                args = [self.expr()]
                while self.peek()[0] == "op" and self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != 1:
                    raise ExprError(
                        f"function {value!r} takes 1 argument, got {len(args)}", col, self.text
                    )
                return Call(value, args[0], col)
            if value in CONSTANTS:
                return Num(CONSTANTS[value], col)
            if value not in VARIABLES or (self.allowed is not None and value not in self.allowed):
                raise ExprError(f"unknown identifier {value!r}", col, self.text)
            return Var(value, col)
        if kind == "op" and value == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            self.error("unexpected end of input")
        if value == ")":
            self.error("unbalanced ')'")
        self.error(f"unexpected {value!r}")


def parse_expr(text, allowed=None):
    """Parse ``text`` into an AST; ``allowed`` restricts the variable names."""
    return _Parser(text, None if allowed is None else frozenset(allowed)).parse()


def evaluate(node, env):
    """Evaluate an AST with numpy semantics; ``env`` maps variable names to values."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise ExprError(f"no value bound for {node.name!r}", node.col) from None
    if isinstance(node, Neg):
        return -evaluate(node.operand, env)
    if isinstance(node, Call):
        return FUNCTIONS[node.func](evaluate(node.arg, env))
    a = evaluate(node.left, env)
    b = evaluate(node.right, env)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        return a / b
    return a**b


def free_variables(node):
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, Neg):
        return free_variables(node.operand)
    if isinstance(node, Call):
        return free_variables(node.arg)
    return free_variables(node.left) | free_variables(node.right)


def _add(a, b):
    if isinstance(a, Num) and a.value == 0:
        return b
    if isinstance(b, Num) and b.value == 0:
        return a
    return BinOp("+", a, b)


def _sub(a, b):
    if isinstance(b, Num) and b.value == 0:
        return a
    if isinstance(a, Num) and a.value == 0:
        return Neg(b)
    return BinOp("-", a, b)


def _mul(a, b):
    for x, y in ((a, b), (b, a)):
        if isinstance(x, Num):
            if x.value == 0:
                return Num(0.0)
            if x.value == 1:
                return y
    return BinOp("*", a, b)


def _div(a, b):
    if isinstance(a, Num) and a.value == 0:
        return Num(0.0)
    return BinOp("/", a, b)


def differentiate(node, name):
    """Symbolic partial derivative of an AST with respect to a variable."""
    if isinstance(node, Num):
        return Num(0.0)
    if isinstance(node, Var):
        return Num(1.0 if node.name == name else 0.0)
    if isinstance(node, Neg):
        d = differentiate(node.operand, name)
        return Num(0.0) if isinstance(d, Num) and d.value == 0 else Neg(d)
    if isinstance(node, Call):
        u = node.arg
        du = differentiate(u, name)
        if isinstance(du, Num) and du.value == 0:
            return Num(0.0)
        outer = {
            "sin": lambda: Call("cos", u),
            "cos": lambda: Neg(Call("sin", u)),
            "exp": lambda: Call("exp", u),
            "tanh": lambda: _sub(Num(1.0), BinOp("^", Call("tanh", u), Num(2.0))),
            "sqrt": lambda: _div(Num(0.5), Call("sqrt", u)),
            "log": lambda: _div(Num(1.0), u),
        }[node.func]()
        return _mul(outer, du)
    a, b = node.left, node.right
    da, db = differentiate(a, name), differentiate(b, name)
    if node.op == "+":
        return _add(da, db)
    if node.op == "-":
        return _sub(da, db)
    if node.op == "*":
        return _add(_mul(da, b), _mul(a, db))
    if node.op == "/":
        return _sub(_div(da, b), _div(_mul(a, db), BinOp("^", b, Num(2.0))))
    # power
    if name not in free_variables(b):
        return _mul(_mul(b, BinOp("^", a, _sub(b, Num(1.0)))), da)
    return _mul(node, _add(_mul(db, Call("log", a)), _div(_mul(b, da), a)))


class Expression:
    """A parsed expression bundled with its source text."""

    def __init__(self, text, allowed=None):
        self.text = str(text)
        self.ast = parse_expr(self.text, allowed)
        self.variables = frozenset(free_variables(self.ast))

    def __call__(self, **env):
        return evaluate(self.ast, env)

    def derivative(self, name):
        d = Expression.__new__(Expression)
        d.text = f"d({self.text})/d{name}"
        d.ast = differentiate(self.ast, name)
        d.variables = frozenset(free_variables(d.ast))
        return d

    def __repr__(self):
        return f"Expression({self.text!r})"
