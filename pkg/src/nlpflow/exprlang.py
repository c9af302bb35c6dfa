"""Scalar expression language with exact forward-mode derivatives.

Expressions are polynomial-style formulas over named variables:
literals, identifiers, ``+ - * /``, unary minus, integer powers via
``^`` and parentheses.  Gradients are computed with dual numbers, one
sweep per variable.

Grammar (EBNF)::

    expr     = term { ("+" | "-") term } ;
    term     = unary { ("*" | "/") unary } ;
    unary    = "-" unary | power ;
    power    = atom { "^" integer } ;
    atom     = number | identifier | "(" expr ")" ;

``^`` binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``.
Exponents must be non-negative integer literals.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass


class ExprError(ValueError):
    """Base class for expression language errors."""


class ParseError(ExprError):
    """Syntax error, carries the byte offset of the offending token."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnknownVariableError(ParseError):
    """An identifier does not name a declared variable."""


class EvalError(ExprError):
    """Evaluation produced a non-finite value (e.g. division by zero)."""


# ---------------------------------------------------------------------------
# AST nodes.  Frozen: trees are immutable after parsing.

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int
    name: str


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: object
    right: object


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: int  # >= 0


@dataclass(frozen=True)
class Expr:
    """A parsed expression together with its variable namespace."""

    root: object
    variables: tuple


class _Dual:
    """Dual number a + b*eps for one directional derivative."""

    __slots__ = ("val", "dot")

    def __init__(self, val, dot):
        self.val = val
        self.dot = dot

    def __add__(self, other):
        return _Dual(self.val + other.val, self.dot + other.dot)

    def __sub__(self, other):
        return _Dual(self.val - other.val, self.dot - other.dot)

    def __mul__(self, other):
        return _Dual(self.val * other.val,
                     self.val * other.dot + self.dot * other.val)

    def __truediv__(self, other):
        if other.val == 0.0:
            raise EvalError("division by zero")
        q = self.val / other.val
        return _Dual(q, (self.dot - q * other.dot) / other.val)

    def __neg__(self):
        return _Dual(-self.val, -self.dot)

    def powi(self, k):
        # k is a non-negative integer; derivative k * b^(k-1) * b'.
        if k == 0:
            return _Dual(1.0, 0.0)
        v = self.val ** k
        return _Dual(v, k * self.val ** (k - 1) * self.dot)


_TOKEN_RE = re.compile(r"""
    (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
  | (?P<ws>\s+)
""", re.VERBOSE)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, tokens, var_index):
        self.tokens = tokens
        self.pos = 0
        self.var_index = var_index

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        node = self.atom()
        while self.peek()[1] == "^":
            self.take()
            kind, text, off = self.peek()
            if kind != "num":
                raise ParseError("exponent must be a non-negative integer literal", off)
            value = float(text)
            if value != int(value):
                raise ParseError(f"non-integer exponent {text}", off)
            self.take()
            node = Pow(node, int(value))
        return node

    def atom(self):
        kind, text, off = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "ident":
            if text not in self.var_index:
                raise UnknownVariableError(f"unknown identifier {text!r}", off)
            return Var(self.var_index[text], text)
        if text == "(":
            node = self.expr()
            kind, text, off = self.take()
            if text != ")":
                raise ParseError("expected ')'", off)
            return node
        raise ParseError(f"unexpected token {text!r}", off)


def parse(text, variables):
    """Parse ``text`` over the ordered variable name list ``variables``."""
    variables = tuple(variables)
    if not text.strip():
        raise ParseError("empty expression", 0)
    if len(set(variables)) != len(variables):
        raise ExprError("variable names must be distinct")
    var_index = {name: i for i, name in enumerate(variables)}
    parser = _Parser(_tokenize(text), var_index)
    root = parser.expr()
    kind, tok, off = parser.peek()
    if kind != "end":
        raise ParseError(f"trailing input {tok!r}", off)
    return Expr(root, variables)


def _eval_node(node, x):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return x[node.index]
    if isinstance(node, Neg):
        return -_eval_node(node.arg, x)
    if isinstance(node, Pow):
        return _eval_node(node.base, x) ** node.exponent
    left = _eval_node(node.left, x)
    right = _eval_node(node.right, x)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if right == 0.0:
        raise EvalError("division by zero")
    return left / right


def _eval_dual(node, duals):
    if isinstance(node, Num):
        return _Dual(node.value, 0.0)
    if isinstance(node, Var):
        return duals[node.index]
    if isinstance(node, Neg):
        return -_eval_dual(node.arg, duals)
    if isinstance(node, Pow):
        return _eval_dual(node.base, duals).powi(node.exponent)
    left = _eval_dual(node.left, duals)
    right = _eval_dual(node.right, duals)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    return left / right


def evaluate(e, x):
    """Evaluate the expression at the point ``x`` (indexable of floats)."""
    if len(x) != len(e.variables):
        raise ExprError(f"expected {len(e.variables)} coordinates, got {len(x)}")
    value = _eval_node(e.root, x)
    if not math.isfinite(value):
        raise EvalError(f"non-finite value {value!r}")
    return value


def grad(e, x):
    """Gradient at ``x`` via dual numbers, one sweep per variable."""
    n = len(e.variables)
    if len(x) != n:
        raise ExprError(f"expected {n} coordinates, got {len(x)}")
    out = [0.0] * n
    for i in range(n):
        duals = [_Dual(float(x[j]), 1.0 if j == i else 0.0) for j in range(n)]
        d = _eval_dual(e.root, duals)
        if not (math.isfinite(d.val) and math.isfinite(d.dot)):
            raise EvalError("non-finite value in derivative sweep")
        out[i] = d.dot
    return out


def to_string(e):
    """Canonical fully parenthesized printout; re-parses to the same tree."""
    return _print_node(e.root)


def _print_node(node):
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{_print_node(node.arg)})"
    if isinstance(node, Pow):
        return f"({_print_node(node.base)}^{node.exponent})"
    return f"({_print_node(node.left)} {node.op} {_print_node(node.right)})"


def substitute(e, replacements, variables):
    """Replace variables of ``e`` by sub-expressions over a new namespace.

    ``replacements`` maps a variable index of ``e`` to the root node of an
    expression already parsed over ``variables``; unmapped variables must
    exist (same name, any index) in the new namespace.
    """
    variables = tuple(variables)
    index = {name: i for i, name in enumerate(variables)}

    def walk(node):
        if isinstance(node, Var):
            if node.index in replacements:
                return replacements[node.index]
            return Var(index[node.name], node.name)
        if isinstance(node, Neg):
            return Neg(walk(node.arg))
        if isinstance(node, Pow):
            return Pow(walk(node.base), node.exponent)
        if isinstance(node, BinOp):
            return BinOp(node.op, walk(node.left), walk(node.right))
        return node

    return Expr(walk(e.root), variables)
