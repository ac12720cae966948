"""Forward-mode jet arithmetic.

Two jet types are provided:

* :class:`Jet2` -- value, gradient and Hessian of a function of ``n`` variables.
* :class:`Taylor4` -- the degree-4 Taylor polynomial of a univariate function,
  stored as coefficients ``c0..c4`` (so the k-th derivative is ``k! * c_k``).

Elementary functions are applied by composing with their derivatives at the
base value, which keeps every rule total and exact to roundoff.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

ORDER = 4


class DomainError(ValueError):
    """A function was evaluated outside its real domain."""


def _falling(p: float, k: int) -> float:
    out = 1.0
    for j in range(k):
        out *= p - j
    return out


def _tan_derivs(x: float, order: int) -> list[float]:
    # d/dx Q(tan x) = Q'(tan x) (1 + tan^2 x), tracked as a polynomial in tan x
    t = math.tan(x)
    poly = np.array([0.0, 1.0])
    out = []
    for _ in range(order + 1):
        out.append(float(np.polynomial.polynomial.polyval(t, poly)))
        dpoly = np.polynomial.polynomial.polyder(poly)
        poly = np.polynomial.polynomial.polymul(dpoly, [1.0, 0.0, 1.0])
    return out


def derivatives(name: str, x: float, order: int) -> list[float]:
    """Derivatives ``f, f', ..., f^(order)`` of elementary function ``name`` at ``x``."""
    if name == "sin":
        cyc = [math.sin(x), math.cos(x), -math.sin(x), -math.cos(x)]
        return [cyc[k % 4] for k in range(order + 1)]
    if name == "cos":
        cyc = [math.cos(x), -math.sin(x), -math.cos(x), math.sin(x)]
        return [cyc[k % 4] for k in range(order + 1)]
    if name == "exp":
        return [math.exp(x)] * (order + 1)
    if name == "log":
        if x <= 0.0:
            raise DomainError(f"log of non-positive value {x!r}")
        out = [math.log(x)]
        for k in range(1, order + 1):
            out.append((-1) ** (k - 1) * math.factorial(k - 1) / x**k)
        return out
    if name == "sqrt":
        if x <= 0.0:
            raise DomainError(f"sqrt of non-positive value {x!r}")
        return [_falling(0.5, k) * x ** (0.5 - k) for k in range(order + 1)]
    if name == "tan":
        if abs(math.cos(x)) < 1e-300:
            raise DomainError(f"tan pole at {x!r}")
        return _tan_derivs(x, order)
    raise ValueError(f"unknown function {name!r}")


def power_derivatives(x: float, p: Fraction, order: int) -> list[float]:
    if p.denominator != 1 and x <= 0.0:
        raise DomainError(f"non-integer power of non-positive value {x!r}")
    if p < 0 and x == 0.0:
        raise DomainError("division by zero")
    pf = float(p)
    out = []
    for k in range(order + 1):
        c = _falling(pf, k)
        if c == 0.0:
            out.append(0.0)
        elif p.denominator == 1:
            out.append(c * x ** (int(p) - k))
        else:
            out.append(c * x ** (pf - k))
    return out


class Jet2:
    """Second-order jet of a function of ``n`` variables."""

    __slots__ = ("value", "grad", "hess")

    def __init__(self, value: float, grad: np.ndarray, hess: np.ndarray):
        self.value = float(value)
        self.grad = grad
        self.hess = hess

    @classmethod
    def constant(cls, c: float, n: int) -> Jet2:
        return cls(c, np.zeros(n), np.zeros((n, n)))

    @classmethod
    def variable(cls, x: float, i: int, n: int) -> Jet2:
        g = np.zeros(n)
        g[i] = 1.0
        return cls(x, g, np.zeros((n, n)))

    def _lift(self, other) -> Jet2:
        if isinstance(other, Jet2):
            return other
        return Jet2.constant(float(other), self.grad.size)

    def __add__(self, other):
        o = self._lift(other)
        return Jet2(self.value + o.value, self.grad + o.grad, self.hess + o.hess)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._lift(other)
        return Jet2(self.value - o.value, self.grad - o.grad, self.hess - o.hess)

    def __rsub__(self, other):
        return self._lift(other) - self

    def __neg__(self):
        return Jet2(-self.value, -self.grad, -self.hess)

    def __mul__(self, other):
        o = self._lift(other)
        cross = np.outer(self.grad, o.grad)
        hess = self.value * o.hess + o.value * self.hess + (cross + cross.T)
        return Jet2(self.value * o.value, self.value * o.grad + o.value * self.grad, hess)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._lift(other)
        if o.value == 0.0:
            raise DomainError("division by zero")
        return self * o.power(Fraction(-1))

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def compose(self, d: list[float]) -> Jet2:
        """Apply a function with derivatives ``d = [f, f', f'', ...]`` at ``self.value``."""
        g = self.grad
        return Jet2(d[0], d[1] * g, d[1] * self.hess + d[2] * np.outer(g, g))

    def apply(self, name: str) -> Jet2:
        return self.compose(derivatives(name, self.value, 2))

    def power(self, p: Fraction) -> Jet2:
        if p.denominator == 1 and p >= 0:
            return _int_power(self, int(p), Jet2.constant(1.0, self.grad.size))
        return self.compose(power_derivatives(self.value, p, 2))

    def __repr__(self) -> str:
        return f"Jet2(value={self.value!r}, grad={self.grad!r}, hess={self.hess!r})"


class Taylor4:
    """Degree-4 Taylor polynomial ``c0 + c1 dt + ... + c4 dt^4``."""

    __slots__ = ("c",)

    def __init__(self, c):
        self.c = np.asarray(c, dtype=float)

    @classmethod
    def constant(cls, v: float) -> Taylor4:
        c = np.zeros(ORDER + 1)
        c[0] = v
        return cls(c)

    @classmethod
    def variable(cls, t0: float) -> Taylor4:
        c = np.zeros(ORDER + 1)
        c[0] = t0
        c[1] = 1.0
        return cls(c)

    @property
    def value(self) -> float:
        return float(self.c[0])

    def derivatives(self) -> np.ndarray:
        """Derivatives ``f(t0), f'(t0), ..., f''''(t0)``."""
        return self.c * np.array([math.factorial(k) for k in range(ORDER + 1)])

    def _lift(self, other) -> Taylor4:
        return other if isinstance(other, Taylor4) else Taylor4.constant(float(other))

    def __add__(self, other):
        return Taylor4(self.c + self._lift(other).c)

    __radd__ = __add__

    def __sub__(self, other):
        return Taylor4(self.c - self._lift(other).c)

    def __rsub__(self, other):
        return Taylor4(self._lift(other).c - self.c)

    def __neg__(self):
        return Taylor4(-self.c)

    def __mul__(self, other):
        b = self._lift(other).c
        a = self.c
        out = np.zeros(ORDER + 1)
        for k in range(ORDER + 1):
            out[k] = sum(a[j] * b[k - j] for j in range(k + 1))
        return Taylor4(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._lift(other)
        if o.c[0] == 0.0:
            raise DomainError("division by zero")
        return self * o.power(Fraction(-1))

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def compose(self, d: list[float]) -> Taylor4:
        delta = Taylor4(np.concatenate([[0.0], self.c[1:]]))
        out = Taylor4.constant(d[0])
        term = Taylor4.constant(1.0)
        for k in range(1, ORDER + 1):
            term = term * delta
            out = out + term * (d[k] / math.factorial(k))
        return out

    def apply(self, name: str) -> Taylor4:
        return self.compose(derivatives(name, self.value, ORDER))

    def power(self, p: Fraction) -> Taylor4:
        if p.denominator == 1 and p >= 0:
            return _int_power(self, int(p), Taylor4.constant(1.0))
        return self.compose(power_derivatives(self.value, p, ORDER))

    def __repr__(self) -> str:
        return f"Taylor4({self.c.tolist()!r})"


def _int_power(x, k: int, one):
    result = one
    base = x
    while k:
        if k & 1:
            result = result * base
        k >>= 1
        if k:
            base = base * base
    return result
