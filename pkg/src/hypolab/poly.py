"""Exact multivariate polynomials with rational coefficients.

Just enough algebra for the Heisenberg carré du champ computations:
ring operations, partial derivatives and exact evaluation. Terms are stored
as ``{exponent_tuple: Fraction}`` with zero coefficients dropped.
"""
from __future__ import annotations

import ast
import itertools
import operator
from fractions import Fraction
from numbers import Rational

from .errors import UnsupportedError


def _as_fraction(c):
    # plain ints stay ints: integer arithmetic is much faster than Fraction
    if isinstance(c, (int, Fraction)) and not isinstance(c, bool):
        return c
    if isinstance(c, Rational):
        return Fraction(c)
    if isinstance(c, float):
        # decimal reading keeps 0.1 as 1/10 rather than its binary neighbour
        return Fraction(repr(c))
    raise UnsupportedError(f"cannot use {type(c).__name__} as a polynomial coefficient")


class Poly:
    __slots__ = ("names", "terms")

    def __init__(self, names, terms=None):
        self.names = tuple(names)
        self.terms = {}
        for e, c in (terms or {}).items():
            c = _as_fraction(c)
            if c:
                self.terms[tuple(e)] = c

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, names, c):
        return cls(names, {(0,) * len(names): c})

    @classmethod
    def variable(cls, names, name):
        e = [0] * len(names)
        e[list(names).index(name)] = 1
        return cls(names, {tuple(e): 1})

    @classmethod
    def generators(cls, names):
        return tuple(cls.variable(names, v) for v in names)

    @classmethod
    def parse(cls, text, names):
        """Parse ``text`` like ``"x**2*z - 3*y/2"`` over the variables ``names``."""
        env = dict(zip(names, cls.generators(names)))
        try:
            tree = ast.parse(text.replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise UnsupportedError(f"not a polynomial: {text!r}") from exc
        return cls._lift(names, _eval_poly_ast(tree.body, env))

    @classmethod
    def _lift(cls, names, value):
        if isinstance(value, Poly):
            return value
        return cls.constant(names, value)

    def _coerce(self, other):
        if isinstance(other, Poly):
            if other.names != self.names:
                raise UnsupportedError("polynomials over different variables")
            return other
        return Poly.constant(self.names, other)

    # ring operations ----------------------------------------------------
    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0) + c
        return Poly(self.names, out)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.names, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        out = {}
        for (e1, c1), (e2, c2) in itertools.product(self.terms.items(), other.terms.items()):
            e = tuple(a + b for a, b in zip(e1, e2))
            out[e] = out.get(e, 0) + c1 * c2
        return Poly(self.names, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Poly):
            raise UnsupportedError("polynomial division is not supported")
        inv = Fraction(1) / _as_fraction(other)
        return Poly(self.names, {e: c * inv for e, c in self.terms.items()})

    def __pow__(self, k):
        if not isinstance(k, int) or k < 0:
            raise UnsupportedError("only nonnegative integer powers stay polynomial")
        out = Poly.constant(self.names, 1)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        try:
            other = self._coerce(other)
        except UnsupportedError:
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash((self.names, frozenset(self.terms.items())))

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for e, c in sorted(self.terms.items(), reverse=True):
            mono = "*".join(f"{v}^{p}" if p > 1 else v for v, p in zip(self.names, e) if p)
            parts.append(f"{c}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)

    # calculus -----------------------------------------------------------
    def diff(self, name):
        i = self.names.index(name)
        out = {}
        for e, c in self.terms.items():
            if e[i]:
                e2 = list(e)
                e2[i] -= 1
                out[tuple(e2)] = c * e[i]
        return Poly(self.names, out)

    def degree(self):
        return max((sum(e) for e in self.terms), default=0)

    def is_zero(self):
        return not self.terms

    def __call__(self, *point):
        """Exact value at a point; rational input gives a ``Fraction``."""
        if len(point) == 1 and isinstance(point[0], (tuple, list)):
            point = tuple(point[0])
        if len(point) != len(self.names):
            raise ValueError(f"expected {len(self.names)} coordinates")
        vals = [_as_fraction(p) if not isinstance(p, Fraction) else p for p in point]
        total = Fraction(0)
        for e, c in self.terms.items():
            term = c
            for v, p in zip(vals, e):
                if p:
                    term *= v ** p
            total += term
        return total


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}


def _eval_poly_ast(node, env):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return _as_fraction(node.value)
    if isinstance(node, ast.Name):
        if node.id not in env:
            raise UnsupportedError(f"unknown symbol {node.id!r}")
        return env[node.id]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_poly_ast(node.operand, env)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        left = _eval_poly_ast(node.left, env)
        right = _eval_poly_ast(node.right, env)
        if isinstance(node.op, ast.Pow):
            if isinstance(right, Poly) or right.denominator != 1:
                raise UnsupportedError("exponents must be nonnegative integers")
            right = int(right)
        if isinstance(node.op, ast.Div) and isinstance(right, Poly):
            raise UnsupportedError("division by a polynomial is not polynomial")
        return _BINOPS[type(node.op)](left, right)
    raise UnsupportedError(f"unsupported expression: {ast.dump(node)}")


def monomials(names, max_degree):
    """Every monomial over ``names`` with total degree at most ``max_degree``."""
    k = len(names)
    for total in range(max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(k), total):
            e = [0] * k
            for i in combo:
                e[i] += 1
            yield Poly(names, {tuple(e): 1})
