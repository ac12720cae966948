"""Closed-form scalar expressions: parsing, printing and jet evaluation.

Grammar (lowest to highest precedence)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          exponent must fold to a rational constant
    atom   := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

``FUNC`` is one of ``sin cos tan exp log sqrt``; ``pi`` is a named constant
unless it is declared as a variable.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence, Union

import numpy as np

from .jets import DomainError, Jet2, Taylor4

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt")
CONSTANTS = {"pi": math.pi}


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


class NonConstantExponentError(ExprError):
    pass


# -- AST ---------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    text: str

    @property
    def value(self) -> float:
        return float(self.text)


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: Fraction


@dataclass(frozen=True)
class Func:
    name: str
    arg: "Expr"


Expr = Union[Num, Const, Var, Neg, BinOp, Pow, Func]


def Add(a: Expr, b: Expr) -> BinOp:
    return BinOp("+", a, b)


def Sub(a: Expr, b: Expr) -> BinOp:
    return BinOp("-", a, b)


def Mul(a: Expr, b: Expr) -> BinOp:
    return BinOp("*", a, b)


def Div(a: Expr, b: Expr) -> BinOp:
    return BinOp("/", a, b)


def number(x: float | int | str) -> Expr:
    """Literal for ``x``; negative values become ``Neg(Num)``."""
    if isinstance(x, str):
        return Num(x)
    if x < 0:
        return Neg(number(-x))
    return Num(repr(float(x)) if not float(x).is_integer() else str(int(x)))


# -- tokenizer / parser ------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            offset = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[offset]!r}", offset)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, variables: Sequence[str]):
        self.text = text
        self.vars = set(variables)
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, off = self.take()
        if val != value or kind == "end":
            raise ExprSyntaxError(f"expected {value!r}", off)

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", off)
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            left = BinOp(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, val, off = self.peek()
        if kind == "op" and val == "^":
            self.take()
            exp_off = self.peek()[2]
            exponent = self.unary()
            try:
                q = fold_constant(exponent)
            except NonConstantExponentError:
                raise NonConstantExponentError(
                    f"exponent must be a constant rational at offset {exp_off}"
                ) from None
            return Pow(base, q)
        return base

    def atom(self) -> Expr:
        kind, val, off = self.take()
        if kind == "num":
            return Num(val)
        if kind == "name":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Func(val, arg)
            if val in self.vars:
                return Var(val)
            if val in CONSTANTS:
                return Const(val)
            raise UnknownIdentifierError(val, off)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", off)
        raise ExprSyntaxError(f"unexpected token {val!r}", off)


def parse(text: str, variables: Sequence[str]) -> Expr:
    """Parse ``text`` into an expression tree over ``variables``."""
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(text, variables).parse()


def fold_constant(e: Expr) -> Fraction:
    """Exact rational value of a constant subtree (used for exponents)."""
    if isinstance(e, Num):
        return Fraction(e.text)
    if isinstance(e, Neg):
        return -fold_constant(e.arg)
    if isinstance(e, BinOp):
        a, b = fold_constant(e.left), fold_constant(e.right)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if b == 0:
            raise NonConstantExponentError("division by zero in exponent")
        return a / b
    if isinstance(e, Pow):
        base = fold_constant(e.base)
        if e.exponent.denominator != 1:
            raise NonConstantExponentError("irrational exponent")
        return base ** int(e.exponent)
    raise NonConstantExponentError("exponent is not a rational constant")


# -- printing ----------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return 3
    if isinstance(e, Pow):
        return 4
    return 5


def to_string(e: Expr) -> str:
    """Print ``e`` with the minimal parentheses that re-parse to the same tree."""
    if isinstance(e, Num):
        return e.text
    if isinstance(e, (Var, Const)):
        return e.name
    if isinstance(e, Func):
        return f"{e.name}({to_string(e.arg)})"
    if isinstance(e, Neg):
        inner = to_string(e.arg)
        return "-" + (f"({inner})" if _prec(e.arg) < 3 else inner)
    if isinstance(e, Pow):
        base = to_string(e.base)
        if _prec(e.base) < 5:
            base = f"({base})"
        q = e.exponent
        if q.denominator == 1 and q >= 0:
            exp = str(q.numerator)
        else:
            exp = f"({q.numerator}/{q.denominator})" if q.denominator != 1 else f"({q.numerator})"
        return f"{base}^{exp}"
    level = _PREC[e.op]
    left = to_string(e.left)
    if _prec(e.left) < level:
        left = f"({left})"
    right = to_string(e.right)
    if _prec(e.right) <= level:
        right = f"({right})"
    return f"{left}{e.op}{right}"


# -- evaluation --------------------------------------------------------------


def _apply(name: str, x):
    if isinstance(x, (Jet2, Taylor4)):
        return x.apply(name)
    if name in ("log", "sqrt") and np.any(np.asarray(x) <= 0.0):
        raise DomainError(f"{name} of non-positive value")
    return getattr(np, name)(x)


def _power(x, q: Fraction):
    if isinstance(x, (Jet2, Taylor4)):
        return x.power(q)
    if q.denominator == 1:
        k = int(q)
        if k < 0 and np.any(np.asarray(x) == 0.0):
            raise DomainError("division by zero")
        return x**k if k >= 0 else 1.0 / x ** (-k)
    if np.any(np.asarray(x) <= 0.0):
        raise DomainError("non-integer power of non-positive value")
    return x ** float(q)


def evaluate(e: Expr, env: Mapping[str, object]):
    """Evaluate with variable values from ``env``.

    Values may be floats, numpy arrays (vectorised), :class:`Jet2` or
    :class:`Taylor4`; mixed jets and floats promote to jets.
    """
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Const):
        return CONSTANTS[e.name]
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Neg):
        return -evaluate(e.arg, env)
    if isinstance(e, BinOp):
        a = evaluate(e.left, env)
        b = evaluate(e.right, env)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if not isinstance(b, (Jet2, Taylor4)) and np.any(np.asarray(b) == 0.0):
            raise DomainError("division by zero")
        return a / b
    if isinstance(e, Pow):
        return _power(evaluate(e.base, env), e.exponent)
    if isinstance(e, Func):
        return _apply(e.name, evaluate(e.arg, env))
    raise TypeError(f"not an expression: {e!r}")


def free_variables(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, (Neg, Func)):
        return free_variables(e.arg)
    if isinstance(e, Pow):
        return free_variables(e.base)
    if isinstance(e, BinOp):
        return free_variables(e.left) | free_variables(e.right)
    return set()


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions (used for reparametrising curves)."""
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, mapping))
    if isinstance(e, Func):
        return Func(e.name, substitute(e.arg, mapping))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, mapping), e.exponent)
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    return e


def eval_jet2(e: Expr, point: Sequence[float], variables: Sequence[str]) -> Jet2:
    """Value, gradient and Hessian of ``e`` at ``point`` (ordered as ``variables``)."""
    n = len(variables)
    env = {v: Jet2.variable(float(point[i]), i, n) for i, v in enumerate(variables)}
    out = evaluate(e, env)
    if not isinstance(out, Jet2):
        out = Jet2.constant(float(out), n)
    return out


def eval_taylor4(e: Expr, t0: float, variable: str = "t") -> Taylor4:
    """Degree-4 Taylor jet of univariate ``e`` at ``t0``."""
    out = evaluate(e, {variable: Taylor4.variable(float(t0))})
    if not isinstance(out, Taylor4):
        out = Taylor4.constant(float(out))
    return out
