"""Expression trees over x1..xn with vectorized evaluation and exact jets.

Expressions are immutable dataclass trees. Two evaluation paths exist:

* :meth:`Expr.values` evaluates on a batch of points ``X`` of shape ``(m, n)``.
* :meth:`Expr.jet` propagates value, gradient and Hessian through the tree by
  the usual differentiation rules (forward mode, second order) and marks the
  points where a non-differentiable primitive (``abs`` at 0, ``min``/``max``
  ties, ``sqrt`` at 0) was hit.

The textual grammar accepted by :func:`parse_expr`::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" integer)?
    atom   := NUMBER | VAR | FUNC "(" expr ("," expr)* ")" | "(" expr ")"
    VAR    := "x1" | "x2" | "x3" | ...
    FUNC   := "sqrt" | "abs" | "sin" | "cos" | "min" | "max"

``integer`` is an integer literal, optionally negated and/or parenthesized.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ParseError

FUNCTIONS = ("sqrt", "abs", "sin", "cos", "min", "max")


@dataclass
class Jet:
    """Second-order jet of a scalar expression at a batch of points."""

    v: np.ndarray  # (m,)
    g: np.ndarray  # (m, n)
    h: np.ndarray  # (m, n, n)
    kink: np.ndarray  # (m,) bool

    @classmethod
    def constant(cls, value, m, n):
        return cls(np.full(m, float(value)), np.zeros((m, n)), np.zeros((m, n, n)),
                   np.zeros(m, dtype=bool))


def _outer(a, b):
    return a[:, :, None] * b[:, None, :]


def _chain(u: Jet, d0, d1, d2, kink=None) -> Jet:
    """Compose scalar function with value d0, derivatives d1, d2 onto ``u``."""
    g = d1[:, None] * u.g
    h = d1[:, None, None] * u.h + d2[:, None, None] * _outer(u.g, u.g)
    k = u.kink if kink is None else (u.kink | kink)
    return Jet(d0, g, h, k)


class Expr:
    """Base class of expression nodes."""

    def values(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jet(self, X: np.ndarray) -> Jet:
        raise NotImplementedError

    def to_dsl(self) -> str:
        raise NotImplementedError

    def children(self) -> tuple:
        return ()

    def max_variable(self) -> int:
        """Largest 1-based variable index used (0 if constant)."""
        return max((c.max_variable() for c in self.children()), default=0)

    def is_polynomial(self) -> bool:
        return all(c.is_polynomial() for c in self.children())

    def uses(self, name: str) -> bool:
        return any(c.uses(name) for c in self.children())

    def __call__(self, *coords):
        X = np.atleast_2d(np.asarray(coords, dtype=float))
        return float(self.values(X)[0])

    def __str__(self):
        return self.to_dsl()


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def values(self, X):
        return np.full(X.shape[0], self.value, dtype=float)

    def jet(self, X):
        return Jet.constant(self.value, X.shape[0], X.shape[1])

    def to_dsl(self):
        text = repr(float(self.value))
        return f"({text})" if self.value < 0 else text


@dataclass(frozen=True)
class Var(Expr):
    index: int  # 0-based

    def values(self, X):
        return X[:, self.index].astype(float)

    def jet(self, X):
        m, n = X.shape
        g = np.zeros((m, n))
        g[:, self.index] = 1.0
        return Jet(X[:, self.index].astype(float), g, np.zeros((m, n, n)),
                   np.zeros(m, dtype=bool))

    def to_dsl(self):
        return f"x{self.index + 1}"

    def max_variable(self):
        return self.index + 1


@dataclass(frozen=True)
class Neg(Expr):
    a: Expr

    def children(self):
        return (self.a,)

    def values(self, X):
        return -self.a.values(X)

    def jet(self, X):
        u = self.a.jet(X)
        return Jet(-u.v, -u.g, -u.h, u.kink)

    def to_dsl(self):
        return f"(-{self.a.to_dsl()})"


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    a: Expr
    b: Expr

    def children(self):
        return (self.a, self.b)

    def is_polynomial(self):
        if self.op == "/":
            return self.a.is_polynomial() and isinstance(self.b, Const)
        return super().is_polynomial()

    def values(self, X):
        a, b = self.a.values(X), self.b.values(X)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.op == "+":
                return a + b
            if self.op == "-":
                return a - b
            if self.op == "*":
                return a * b
            out = a / b
            out[b == 0] = np.nan
            return out

    def jet(self, X):
        a, b = self.a.jet(X), self.b.jet(X)
        kink = a.kink | b.kink
        if self.op == "+":
            return Jet(a.v + b.v, a.g + b.g, a.h + b.h, kink)
        if self.op == "-":
            return Jet(a.v - b.v, a.g - b.g, a.h - b.h, kink)
        if self.op == "*":
            return _mul(a, b)
        with np.errstate(divide="ignore", invalid="ignore"):
            bv = np.where(b.v == 0, np.nan, b.v)
            r = _chain(b, 1.0 / bv, -1.0 / bv**2, 2.0 / bv**3)
        return _mul(a, r)

    def to_dsl(self):
        return f"({self.a.to_dsl()} {self.op} {self.b.to_dsl()})"


def _mul(a: Jet, b: Jet) -> Jet:
    v = a.v * b.v
    g = a.v[:, None] * b.g + b.v[:, None] * a.g
    h = (a.v[:, None, None] * b.h + b.v[:, None, None] * a.h
         + _outer(a.g, b.g) + _outer(b.g, a.g))
    return Jet(v, g, h, a.kink | b.kink)


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    k: int

    def children(self):
        return (self.base,)

    def is_polynomial(self):
        return self.k >= 0 and self.base.is_polynomial()

    def values(self, X):
        u = self.base.values(X)
        if self.k >= 0:
            return u**self.k
        with np.errstate(divide="ignore", invalid="ignore"):
            out = 1.0 / np.where(u == 0, np.nan, u) ** (-self.k)
        return out

    def jet(self, X):
        u = self.base.jet(X)
        k = self.k
        if k == 0:
            return Jet.constant(1.0, *X.shape)
        uv = u.v if k > 0 else np.where(u.v == 0, np.nan, u.v)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            d0 = uv**k if k > 0 else 1.0 / uv ** (-k)
            d1 = k * _ipow(uv, k - 1)
            d2 = k * (k - 1) * _ipow(uv, k - 2)
        return _chain(u, d0, d1, d2)

    def to_dsl(self):
        exp = str(self.k) if self.k >= 0 else f"({self.k})"
        return f"({self.base.to_dsl()})^{exp}"


def _ipow(u, k):
    if k >= 0:
        return u**k
    return 1.0 / u ** (-k)


def _sqrt_jet(u: Jet) -> Jet:
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.sqrt(np.where(u.v < 0, np.nan, u.v))
        d1 = np.where(s > 0, 0.5 / s, np.nan)
        d2 = np.where(s > 0, -0.25 / s**3, np.nan)
    return _chain(u, s, d1, d2, kink=(u.v == 0))


def _abs_jet(u: Jet) -> Jet:
    return _chain(u, np.abs(u.v), np.sign(u.v), np.zeros_like(u.v), kink=(u.v == 0))


def _sin_jet(u: Jet) -> Jet:
    return _chain(u, np.sin(u.v), np.cos(u.v), -np.sin(u.v))


def _cos_jet(u: Jet) -> Jet:
    return _chain(u, np.cos(u.v), -np.sin(u.v), -np.cos(u.v))


def _select(a: Jet, b: Jet, take_a: np.ndarray, tie: np.ndarray) -> Jet:
    v = np.where(take_a, a.v, b.v)
    g = np.where(take_a[:, None], a.g, b.g)
    h = np.where(take_a[:, None, None], a.h, b.h)
    kink = np.where(take_a, a.kink, b.kink) | tie
    return Jet(v, g, h, kink)


_UNARY_VALUES: dict[str, Callable] = {
    "sqrt": lambda u: np.sqrt(np.where(u < 0, np.nan, u)),
    "abs": np.abs,
    "sin": np.sin,
    "cos": np.cos,
}
_UNARY_JETS: dict[str, Callable] = {
    "sqrt": _sqrt_jet,
    "abs": _abs_jet,
    "sin": _sin_jet,
    "cos": _cos_jet,
}


@dataclass(frozen=True)
class Call(Expr):
    name: str
    args: tuple

    def children(self):
        return self.args

    def is_polynomial(self):
        return False

    def uses(self, name):
        return self.name == name or super().uses(name)

    def values(self, X):
        vals = [a.values(X) for a in self.args]
        if self.name in _UNARY_VALUES:
            with np.errstate(invalid="ignore"):
                return _UNARY_VALUES[self.name](vals[0])
        fold = np.minimum if self.name == "min" else np.maximum
        out = vals[0]
        for v in vals[1:]:
            out = fold(out, v)
        return out

    def jet(self, X):
        jets = [a.jet(X) for a in self.args]
        if self.name in _UNARY_JETS:
            return _UNARY_JETS[self.name](jets[0])
        out = jets[0]
        for b in jets[1:]:
            take_a = out.v < b.v if self.name == "min" else out.v > b.v
            out = _select(out, b, take_a, out.v == b.v)
        return out

    def to_dsl(self):
        return f"{self.name}({', '.join(a.to_dsl() for a in self.args)})"


def var(i: int) -> Var:
    """1-based variable constructor, ``var(1)`` is ``x1``."""
    return Var(i - 1)


# --------------------------------------------------------------------------
# parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op><=|>=|==|[-+*/^(),<>=]))"
)


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str, line: int):
    toks, pos = [], 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        mt = _TOKEN.match(text, pos)
        if mt is None or mt.end() == pos:
            col = pos + 1 + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[col - 1]!r}", line, col, text)
        kind = mt.lastgroup
        toks.append(_Tok(kind, mt.group(kind), mt.start(kind)))
        pos = mt.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, dim: int | None, line: int):
        self.text = text
        self.dim = dim
        self.line = line
        self.toks = _tokenize(text, line)
        self.i = 0

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise ParseError(msg, self.line, tok.pos + 1, self.text)

    def peek(self):
        return self.toks[self.i]

    def take(self, text=None):
        tok = self.toks[self.i]
        if text is not None and tok.text != text:
            self.error(f"expected {text!r}, found {tok.text or 'end of input'!r}")
        self.i += 1
        return tok

    def expr(self):
        node = self.term()
        while self.peek().text in ("+", "-"):
            op = self.take().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek().text in ("*", "/"):
            op = self.take().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek().text == "-":
            self.take()
            inner = self.unary()
            if isinstance(inner, Const):
                return Const(-inner.value)
            return Neg(inner)
        if self.peek().text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek().text == "^":
            self.take()
            base = Pow(base, self.integer())
        return base

    def integer(self):
        paren = self.peek().text == "("
        if paren:
            self.take()
        sign = 1
        if self.peek().text == "-":
            self.take()
            sign = -1
        tok = self.peek()
        if tok.kind != "num" or not tok.text.isdigit():
            self.error("exponent must be an integer literal")
        self.take()
        if paren:
            self.take(")")
        return sign * int(tok.text)

    def atom(self):
        tok = self.peek()
        if tok.kind == "num":
            self.take()
            return Const(float(tok.text))
        if tok.kind == "name":
            self.take()
            name = tok.text
            mt = re.fullmatch(r"x([1-9])", name)
            if mt:
                idx = int(mt.group(1))
                if self.dim is not None and idx > self.dim:
                    self.error(f"variable {name} exceeds dimension {self.dim}", tok)
                return Var(idx - 1)
            if name in FUNCTIONS:
                self.take("(")
                args = [self.expr()]
                while self.peek().text == ",":
                    self.take()
                    args.append(self.expr())
                self.take(")")
                if name in ("min", "max"):
                    if len(args) < 2:
                        self.error(f"{name} needs at least two arguments", tok)
                elif len(args) != 1:
                    self.error(f"{name} takes exactly one argument", tok)
                return Call(name, tuple(args))
            self.error(f"unknown name {name!r}", tok)
        if tok.text == "(":
            self.take()
            node = self.expr()
            self.take(")")
            return node
        self.error(f"unexpected token {tok.text or 'end of input'!r}")

    def finish(self):
        if self.peek().kind != "end":
            self.error(f"unexpected trailing token {self.peek().text!r}")


def parse_expr(text: str, dim: int | None = None, line: int = 1) -> Expr:
    """Parse an expression string; ``dim`` bounds the allowed variable indices."""
    p = _Parser(text, dim, line)
    if p.peek().kind == "end":
        p.error("empty expression")
    node = p.expr()
    p.finish()
    return node


RELATIONS = ("<", "<=", ">", ">=", "=")


def parse_relation(text: str, dim: int | None = None, line: int = 1):
    """Parse ``lhs REL rhs`` into ``(lhs - rhs, REL)``."""
    p = _Parser(text, dim, line)
    lhs = p.expr()
    tok = p.peek()
    rel = "=" if tok.text == "==" else tok.text
    if rel not in RELATIONS:
        p.error("expected a relation (<, <=, >, >=, =)")
    p.take()
    rhs = p.expr()
    p.finish()
    if isinstance(rhs, Const) and rhs.value == 0:
        return lhs, rel
    return BinOp("-", lhs, rhs), rel
