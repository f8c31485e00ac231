"""Small closed expression grammar used for Lagrangians and obstacles.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Names are restricted to the variables a caller allows (``x``, ``u``, ``v``)
plus the constants ``pi`` and ``e``.  Functions: sin, cos, exp, log, sqrt,
abs, pow, min, max.  Parsed expressions evaluate vectorised over numpy arrays
and can be differentiated symbolically.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ParseError

FUNCTIONS = {
    "sin": 1, "cos": 1, "exp": 1, "log": 1, "sqrt": 1, "abs": 1,
    "pow": 2, "min": 2, "max": 2,
}
CONSTANTS = {"pi": math.pi, "e": math.e}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Bin:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


def _tokenize(text):
    pos = 0
    tokens = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            col = pos + 1
            while col <= len(text) and text[col - 1].isspace():
                col += 1
            raise ParseError(f"unexpected character {text[col - 1]!r}", column=col)
        kind = m.lastgroup
        start = m.start(kind) + 1
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text, variables):
        self.tokens = _tokenize(text)
        self.i = 0
        self.variables = set(variables)

    def peek(self):
        return self.tokens[self.i]

    def take(self, value=None):
        tok = self.tokens[self.i]
        if value is not None and tok[1] != value:
            what = tok[1] or "end of input"
            raise ParseError(f"expected {value!r}, found {what!r}", column=tok[2])
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected token {tok[1]!r}", column=tok[2])
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = Bin(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = Bin(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return Bin("^", base, self.unary())
        return base

    def atom(self):
        kind, value, col = self.peek()
        if kind == "num":
            self.take()
            return Num(float(value))
        if kind == "name":
            self.take()
            if self.peek()[1] == "(":
                if value not in FUNCTIONS:
                    raise ParseError(f"unknown function {value!r}", column=col)
                self.take("(")
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.take(")")
                if len(args) != FUNCTIONS[value]:
                    raise ParseError(
                        f"{value} expects {FUNCTIONS[value]} argument(s), got {len(args)}",
                        column=col,
                    )
                return Call(value, tuple(args))
            if value in self.variables:
                return Var(value)
            if value in CONSTANTS:
                return Num(CONSTANTS[value])
            raise ParseError(f"unknown identifier {value!r}", column=col)
        if value == "(":
            self.take()
            node = self.expr()
            self.take(")")
            return node
        raise ParseError(f"unexpected token {value or 'end of input'!r}", column=col)


# --- evaluation ------------------------------------------------------------

def _eval(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -_eval(node.arg, env)
    if isinstance(node, Bin):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            return a / b
        return np.power(a, b)
    f = node.func
    args = [_eval(a, env) for a in node.args]
    if f == "pow":
        return np.power(args[0], args[1])
    if f == "min":
        return np.minimum(args[0], args[1])
    if f == "max":
        return np.maximum(args[0], args[1])
    if f == "_sign":
        return np.sign(args[0])
    if f == "_le":
        # derivative selector of min/max: where(a <= b, da, db)
        return np.where(np.asarray(args[0]) <= np.asarray(args[1]), args[2], args[3])
    return getattr(np, f if f != "abs" else "abs")(args[0])


# --- differentiation -------------------------------------------------------

ZERO, ONE = Num(0.0), Num(1.0)


def _add(a, b):
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    return Bin("+", a, b)


def _sub(a, b):
    if b == ZERO:
        return a
    if a == ZERO:
        return _neg(b)
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    return Bin("-", a, b)


def _neg(a):
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _mul(a, b):
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    return Bin("*", a, b)


def _div(a, b):
    if a == ZERO:
        return ZERO
    if b == ONE:
        return a
    return Bin("/", a, b)


def _depends(node, var):
    if isinstance(node, Var):
        return node.name == var
    if isinstance(node, Num):
        return False
    if isinstance(node, Neg):
        return _depends(node.arg, var)
    if isinstance(node, Bin):
        return _depends(node.left, var) or _depends(node.right, var)
    return any(_depends(a, var) for a in node.args)


def _power_rule(base, expo, var):
    db = diff(base, var)
    if not _depends(expo, var):
        if db == ZERO:
            return ZERO
        if isinstance(expo, Num):
            new_exp = Num(expo.value - 1.0)
            factor = expo
        else:
            new_exp = _sub(expo, ONE)
            factor = expo
        pw = base if new_exp == ONE else Bin("^", base, new_exp)
        if new_exp == ZERO:
            pw = ONE
        return _mul(_mul(factor, pw), db)
    de = diff(expo, var)
    whole = Bin("^", base, expo)
    inner = _add(_mul(de, Call("log", (base,))), _div(_mul(expo, db), base))
    return _mul(whole, inner)


def diff(node, var):
    """Symbolic derivative of ``node`` with respect to variable ``var``."""
    if isinstance(node, Num):
        return ZERO
    if isinstance(node, Var):
        return ONE if node.name == var else ZERO
    if isinstance(node, Neg):
        return _neg(diff(node.arg, var))
    if isinstance(node, Bin):
        a, b = node.left, node.right
        if node.op == "+":
            return _add(diff(a, var), diff(b, var))
        if node.op == "-":
            return _sub(diff(a, var), diff(b, var))
        if node.op == "*":
            return _add(_mul(diff(a, var), b), _mul(a, diff(b, var)))
        if node.op == "/":
            da, db = diff(a, var), diff(b, var)
            num = _sub(_mul(da, b), _mul(a, db))
            if num == ZERO:
                return ZERO
            return _div(num, Bin("^", b, Num(2.0)))
        return _power_rule(a, b, var)
    f, args = node.func, node.args
    if f == "pow":
        return _power_rule(args[0], args[1], var)
    if f in ("min", "max"):
        da, db = diff(args[0], var), diff(args[1], var)
        if da == ZERO and db == ZERO:
            return ZERO
        if f == "min":
            return Call("_le", (args[0], args[1], da, db))
        return Call("_le", (args[0], args[1], db, da))
    if f in ("_sign", "_le"):
        # piecewise constant selectors; derivative zero almost everywhere
        if f == "_le":
            return Call("_le", (args[0], args[1], diff(args[2], var), diff(args[3], var)))
        return ZERO
    a = args[0]
    da = diff(a, var)
    if da == ZERO:
        return ZERO
    if f == "sin":
        return _mul(Call("cos", (a,)), da)
    if f == "cos":
        return _neg(_mul(Call("sin", (a,)), da))
    if f == "exp":
        return _mul(node, da)
    if f == "log":
        return _div(da, a)
    if f == "sqrt":
        return _div(da, _mul(Num(2.0), node))
    if f == "abs":
        return _mul(Call("_sign", (a,)), da)
    raise ValueError(f"cannot differentiate {f}")


def to_string(node):
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_string(node.arg)})"
    if isinstance(node, Bin):
        return f"({to_string(node.left)} {node.op} {to_string(node.right)})"
    return f"{node.func}({', '.join(to_string(a) for a in node.args)})"


class Expression:
    """A parsed expression over a fixed set of variables.

    Calling the object evaluates it; arguments are broadcast with numpy.

    >>> Expression("v^2 + u^2", ("x", "u", "v"))(0.5, 2.0, 1.0)
    5.0
    """

    def __init__(self, source, variables=("x", "u", "v"), _tree=None):
        self.source = source
        self.variables = tuple(variables)
        self.tree = _tree if _tree is not None else _Parser(source, variables).parse()

    def __call__(self, *args):
        env = dict(zip(self.variables, args))
        out = _eval(self.tree, env)
        if np.ndim(out) == 0 and all(np.ndim(a) == 0 for a in args):
            return float(out)
        shape = np.broadcast_shapes(*(np.shape(a) for a in args))
        return np.broadcast_to(np.asarray(out, dtype=float), shape).copy()

    def diff(self, var):
        tree = diff(self.tree, var)
        return Expression(to_string(tree), self.variables, _tree=tree)

    def __repr__(self):
        return f"Expression({self.source!r})"
