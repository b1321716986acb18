"""Scalar expressions of one variable x: parsing, evaluation, differentiation.

The grammar is deliberately small so that symbolic differentiation is total:

    expr   := term  (('+'|'-') term)*
    term   := unary (('*'|'/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' exponent)?      # exponent must fold to a constant
    atom   := NUMBER | 'x' | NAME '(' expr ')' | '(' expr ')'
    NAME   := sin | cos | exp | sqrt | abs | sgn

'^' binds tighter than unary minus, '+'/'-'/'*'/'/' are left-associative.
Exponents are restricted to constant (integer or rational) values; a
general f(x)^g(x) is rejected.  abs differentiates to sgn with the
convention sgn(0) = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np

__all__ = [
    "Expr",
    "Const",
    "Var",
    "Unary",
    "Power",
    "BinOp",
    "ExpressionError",
    "parse_expression",
    "differentiate",
    "evaluate",
    "evaluate_array",
    "to_source",
    "compiled",
    "abs_arguments",
    "is_constant",
]

_FUNCTIONS = ("sin", "cos", "exp", "sqrt", "abs", "sgn")


class ExpressionError(ValueError):
    """Malformed expression; `offset` is the character position in the source."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Unary:
    op: str  # neg | sin | cos | exp | sqrt | abs | sgn
    arg: "Expr"


@dataclass(frozen=True)
class Power:
    base: "Expr"
    exponent: float  # constant only


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * /
    left: "Expr"
    right: "Expr"


Expr = Union[Const, Var, Unary, Power, BinOp]

X = Var()


# ---------------------------------------------------------------------------
# lexer / parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, source: str):
        self.src = source
        self.pos = 0

    def error(self, message: str, offset: int | None = None) -> ExpressionError:
        return ExpressionError(message, self.pos if offset is None else offset)

    def skip_ws(self) -> None:
        while self.pos < len(self.src) and self.src[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.src[self.pos] if self.pos < len(self.src) else ""

    def expect(self, ch: str) -> None:
        if self.peek() != ch:
            raise self.error(f"expected '{ch}'")
        self.pos += 1

    def parse(self) -> Expr:
        self.skip_ws()
        if self.pos >= len(self.src):
            raise self.error("empty expression")
        node = self.expr()
        self.skip_ws()
        if self.pos < len(self.src):
            raise self.error(f"unexpected '{self.src[self.pos]}'")
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek() in ("+", "-"):
            op = self.src[self.pos]
            self.pos += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek() in ("*", "/"):
            op = self.src[self.pos]
            self.pos += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek() == "-":
            self.pos += 1
            return Unary("neg", self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek() == "^":
            caret = self.pos
            self.pos += 1
            exponent = self.unary()
            if not is_constant(exponent):
                raise self.error("exponent must be constant", caret)
            return Power(base, evaluate(exponent, 0.0))
        return base

    def atom(self) -> Expr:
        ch = self.peek()
        if ch == "(":
            self.pos += 1
            node = self.expr()
            self.expect(")")
            return node
        if ch.isdigit() or ch == ".":
            return self.number()
        if ch.isalpha() or ch == "_":
            return self.identifier()
        if ch == "":
            raise self.error("unexpected end of expression")
        raise self.error(f"unexpected '{ch}'")

    def number(self) -> Const:
        start = self.pos
        src = self.src
        n = len(src)
        while self.pos < n and src[self.pos].isdigit():
            self.pos += 1
        if self.pos < n and src[self.pos] == ".":
            self.pos += 1
            while self.pos < n and src[self.pos].isdigit():
                self.pos += 1
        if self.pos < n and src[self.pos] in "eE":
            mark = self.pos
            self.pos += 1
            if self.pos < n and src[self.pos] in "+-":
                self.pos += 1
            if self.pos < n and src[self.pos].isdigit():
                while self.pos < n and src[self.pos].isdigit():
                    self.pos += 1
            else:
                self.pos = mark  # bare 'e' is not an exponent
        text = src[start:self.pos]
        try:
            return Const(float(text))
        except ValueError:
            raise self.error(f"bad number '{text}'", start) from None

    def identifier(self) -> Expr:
        start = self.pos
        src = self.src
        while self.pos < len(src) and (src[self.pos].isalnum() or src[self.pos] == "_"):
            self.pos += 1
        name = src[start:self.pos]
        if name == "x":
            return X
        if name in _FUNCTIONS:
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Unary(name, arg)
        raise self.error(f"unknown identifier '{name}'", start)


def parse_expression(source: str) -> Expr:
    """Parse `source` into an expression tree; raises ExpressionError."""
    if not isinstance(source, str):
        raise TypeError("expression source must be a string")
    return _Parser(source).parse()


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def evaluate(node: Expr, x: float) -> float:
    """Evaluate at a scalar x.  Domain violations yield nan (never raise)."""
    if type(node) is Const:
        return node.value
    if type(node) is Var:
        return x
    if type(node) is BinOp:
        a = evaluate(node.left, x)
        b = evaluate(node.right, x)
        op = node.op
        try:
            if op == "+":
                return a + b
            if op == "-":
                return a - b
            if op == "*":
                return a * b
            return a / b
        except ZeroDivisionError:
            return math.nan
    if type(node) is Power:
        base = evaluate(node.base, x)
        try:
            return math.pow(base, node.exponent)
        except (ValueError, OverflowError, ZeroDivisionError):
            return math.nan
    op = node.op
    v = evaluate(node.arg, x)
    try:
        if op == "neg":
            return -v
        if op == "sin":
            return math.sin(v)
        if op == "cos":
            return math.cos(v)
        if op == "exp":
            return math.exp(v)
        if op == "sqrt":
            return math.sqrt(v)
        if op == "abs":
            return abs(v)
        return float((v > 0.0) - (v < 0.0))  # sgn, sgn(0)=0
    except OverflowError:
        return math.inf if op == "exp" else math.nan
    except ValueError:
        return math.nan


def evaluate_array(node: Expr, x: np.ndarray) -> np.ndarray:
    """Vectorized evaluation on a numpy array."""
    if type(node) is Const:
        return np.full_like(x, node.value, dtype=float)
    if type(node) is Var:
        return np.asarray(x, dtype=float)
    with np.errstate(all="ignore"):
        if type(node) is BinOp:
            a = evaluate_array(node.left, x)
            b = evaluate_array(node.right, x)
            if node.op == "+":
                return a + b
            if node.op == "-":
                return a - b
            if node.op == "*":
                return a * b
            return np.where(b != 0.0, a / np.where(b != 0.0, b, 1.0), np.nan)
        if type(node) is Power:
            base = evaluate_array(node.base, x)
            if float(node.exponent) == int(node.exponent):
                return np.power(base, int(node.exponent))
            out = np.power(np.where(base >= 0.0, base, np.nan), node.exponent)
            return out
        v = evaluate_array(node.arg, x)
        op = node.op
        if op == "neg":
            return -v
        if op == "sin":
            return np.sin(v)
        if op == "cos":
            return np.cos(v)
        if op == "exp":
            return np.exp(v)
        if op == "sqrt":
            return np.sqrt(np.where(v >= 0.0, v, np.nan))
        if op == "abs":
            return np.abs(v)
        return np.sign(v)


def is_constant(node: Expr) -> bool:
    if type(node) is Var:
        return False
    if type(node) is Const:
        return True
    if type(node) is Unary:
        return is_constant(node.arg)
    if type(node) is Power:
        return is_constant(node.base)
    return is_constant(node.left) and is_constant(node.right)


# ---------------------------------------------------------------------------
# differentiation (with light constant folding so trees stay small)
# ---------------------------------------------------------------------------

def _const(node: Expr) -> float | None:
    return node.value if type(node) is Const else None


def _add(a: Expr, b: Expr) -> Expr:
    ca, cb = _const(a), _const(b)
    if ca is not None and cb is not None:
        return Const(ca + cb)
    if ca == 0.0:
        return b
    if cb == 0.0:
        return a
    return BinOp("+", a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    ca, cb = _const(a), _const(b)
    if ca is not None and cb is not None:
        return Const(ca - cb)
    if cb == 0.0:
        return a
    if ca == 0.0:
        return Unary("neg", b)
    return BinOp("-", a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    ca, cb = _const(a), _const(b)
    if ca is not None and cb is not None:
        return Const(ca * cb)
    if ca == 0.0 or cb == 0.0:
        return Const(0.0)
    if ca == 1.0:
        return b
    if cb == 1.0:
        return a
    return BinOp("*", a, b)


def _div(a: Expr, b: Expr) -> Expr:
    ca, cb = _const(a), _const(b)
    if ca == 0.0:
        return Const(0.0)
    if cb == 1.0:
        return a
    if ca is not None and cb is not None and cb != 0.0:
        return Const(ca / cb)
    return BinOp("/", a, b)


def _pow(base: Expr, exponent: float) -> Expr:
    if exponent == 0.0:
        return Const(1.0)
    if exponent == 1.0:
        return base
    cb = _const(base)
    if cb is not None:
        try:
            return Const(math.pow(cb, exponent))
        except (ValueError, OverflowError, ZeroDivisionError):
            pass
    return Power(base, exponent)


def differentiate(node: Expr) -> Expr:
    """Exact symbolic derivative with respect to x."""
    if type(node) is Const:
        return Const(0.0)
    if type(node) is Var:
        return Const(1.0)
    if type(node) is BinOp:
        u, v = node.left, node.right
        du, dv = differentiate(u), differentiate(v)
        if node.op == "+":
            return _add(du, dv)
        if node.op == "-":
            return _sub(du, dv)
        if node.op == "*":
            return _add(_mul(du, v), _mul(u, dv))
        return _div(_sub(_mul(du, v), _mul(u, dv)), _pow(v, 2.0))
    if type(node) is Power:
        du = differentiate(node.base)
        return _mul(_mul(Const(node.exponent), _pow(node.base, node.exponent - 1.0)), du)
    op, u = node.op, node.arg
    du = differentiate(u)
    if op == "neg":
        return _sub(Const(0.0), du) if type(du) is Const else Unary("neg", du)
    if op == "sin":
        return _mul(Unary("cos", u), du)
    if op == "cos":
        return _mul(Unary("neg", Unary("sin", u)), du)
    if op == "exp":
        return _mul(Unary("exp", u), du)
    if op == "sqrt":
        return _div(du, _mul(Const(2.0), Unary("sqrt", u)))
    if op == "abs":
        return _mul(Unary("sgn", u), du)
    # d sgn/dx = 0 away from the kink; the kink itself is flagged, not differentiated
    return Const(0.0)


# ---------------------------------------------------------------------------
# printing and compilation
# ---------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "pow": 4}


def to_source(node: Expr) -> str:
    """Infix form that reparses to an equivalent tree."""
    text, _ = _render(node)
    return text


def _render(node: Expr) -> tuple[str, int]:
    if type(node) is Const:
        v = node.value
        if v < 0 or (v == 0.0 and math.copysign(1.0, v) < 0):
            return f"-{_fmt(-v)}", _PREC["neg"]
        return _fmt(v), 5
    if type(node) is Var:
        return "x", 5
    if type(node) is Unary:
        if node.op == "neg":
            inner, prec = _render(node.arg)
            if prec < _PREC["neg"]:
                inner = f"({inner})"
            return f"-{inner}", _PREC["neg"]
        inner, _ = _render(node.arg)
        return f"{node.op}({inner})", 5
    if type(node) is Power:
        base, prec = _render(node.base)
        if prec < 5:  # keep the base atomic: ^ binds tightest
            base = f"({base})"
        exp = _fmt(node.exponent) if node.exponent >= 0 else f"(-{_fmt(-node.exponent)})"
        return f"{base}^{exp}", _PREC["pow"]
    left, lp = _render(node.left)
    right, rp = _render(node.right)
    prec = _PREC[node.op]
    if lp < prec:
        left = f"({left})"
    # right child needs parens at equal precedence: - and / are left-associative
    if rp < prec or (rp == prec and node.op in ("-", "/")):
        right = f"({right})"
    return f"{left}{node.op}{right}", prec


def _fmt(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _python_source(node: Expr) -> str:
    if type(node) is Const:
        return repr(node.value)
    if type(node) is Var:
        return "x"
    if type(node) is BinOp:
        return f"({_python_source(node.left)}{node.op}{_python_source(node.right)})"
    if type(node) is Power:
        return f"_pow({_python_source(node.base)},{repr(node.exponent)})"
    return f"_{node.op}({_python_source(node.arg)})"


def _safe_pow(a: float, b: float) -> float:
    try:
        return math.pow(a, b)
    except (ValueError, OverflowError, ZeroDivisionError):
        return math.nan


def _safe_sqrt(v: float) -> float:
    return math.sqrt(v) if v >= 0.0 else math.nan


def _safe_exp(v: float) -> float:
    try:
        return math.exp(v)
    except OverflowError:
        return math.inf


_COMPILE_ENV = {
    "__builtins__": {},
    "_pow": _safe_pow,
    "_neg": lambda v: -v,
    "_sin": math.sin,
    "_cos": math.cos,
    "_exp": _safe_exp,
    "_sqrt": _safe_sqrt,
    "_abs": abs,
    "_sgn": lambda v: float((v > 0.0) - (v < 0.0)),
}


@lru_cache(maxsize=512)
def compiled(node: Expr):
    """Fast scalar callable for a tree.  Falls back to nan on domain errors."""
    fn = eval(f"lambda x: {_python_source(node)}", dict(_COMPILE_ENV))

    def call(x: float, _fn=fn) -> float:
        try:
            return _fn(x)
        except (ZeroDivisionError, ValueError, OverflowError):
            return math.nan

    return call


def abs_arguments(node: Expr) -> tuple[Expr, ...]:
    """Subtrees appearing inside abs()/sgn(); their zeros are slope kinks."""
    found: list[Expr] = []

    def walk(n: Expr) -> None:
        if type(n) is Unary:
            if n.op in ("abs", "sgn"):
                found.append(n.arg)
            walk(n.arg)
        elif type(n) is BinOp:
            walk(n.left)
            walk(n.right)
        elif type(n) is Power:
            walk(n.base)

    walk(node)
    return tuple(found)
