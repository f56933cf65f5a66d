"""Scalar expressions over state symbols ``x1..xn`` and control symbols ``u1..ur``.

Grammar (whitespace is ignored)::

    expr   = term { ("+" | "-") term } ;
    term   = unary { ("*" | "/") unary } ;
    unary  = ("-" | "+") unary | power ;
    power  = atom [ "^" unary ] ;
    atom   = number | symbol | func "(" expr ")" | "(" expr ")" ;
    symbol = ("x" | "u") digits ;
    func   = "sin" | "cos" | "exp" | "log" | "sqrt" | "abs" ;

``^`` binds tighter than unary minus, so ``-x1^2`` is ``-(x1^2)``, and it is
right-associative.  There is deliberately no time symbol: every expression is
autonomous.

Parsed trees are immutable.  Evaluation goes through a compiled postfix tape
executed by the active kernel backend, which also carries forward-mode dual
numbers for exact first derivatives.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence, Union

import numpy as np

from . import _tape
from .errors import ExprSyntaxError, UnknownSymbol

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "abs")


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Sym:
    kind: str  # "x" or "u"
    index: int  # 1-based, as written

    @property
    def name(self) -> str:
        return f"{self.kind}{self.index}"


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or a function name
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


Node = Union[Const, Sym, Unary, Binary]


# ---------------------------------------------------------------------------
# tokenizer / parser

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)
_SYMBOL = re.compile(r"([xu])(\d+)$")


class _Token(NamedTuple):
    kind: str
    text: str
    offset: int


def _byte_offset(source: str, index: int) -> int:
    return len(source[:index].encode("utf-8"))


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            start = pos + (len(source[pos:]) - len(source[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {source[start]!r}", source, _byte_offset(source, start))
        kind = m.lastgroup
        tokens.append(_Token(kind, m.group(kind), _byte_offset(source, m.start(kind))))
        pos = m.end()
    tokens.append(_Token("end", "", _byte_offset(source, len(source))))
    return tokens


class _Parser:
    def __init__(self, source: str, n: int, r: int):
        self.source = source
        self.n = n
        self.r = r
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def take(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message: str, tok: _Token):
        raise ExprSyntaxError(message, self.source, tok.offset)

    def expect(self, text: str):
        tok = self.take()
        if tok.text != text or tok.kind != "op":
            self.fail(f"expected {text!r}", tok)

    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            self.fail(f"unexpected {tok.text!r}", tok)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.take().text
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.take().text
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Node:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.take()
            return Unary("neg", self.unary())
        if tok.kind == "op" and tok.text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.take()
            return Binary("^", base, self.unary())
        return base

    def atom(self) -> Node:
        tok = self.take()
        if tok.kind == "num":
            return Const(float(tok.text))
        if tok.kind == "name":
            if tok.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Unary(tok.text, arg)
            m = _SYMBOL.match(tok.text)
            if m is None:
                raise UnknownSymbol(tok.text)
            kind, index = m.group(1), int(m.group(2))
            bound = self.n if kind == "x" else self.r
            if not 1 <= index <= bound:
                raise UnknownSymbol(tok.text)
            return Sym(kind, index)
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "end":
            self.fail("unexpected end of input", tok)
        self.fail(f"unexpected {tok.text!r}", tok)


# ---------------------------------------------------------------------------
# tree utilities

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}
_ATOM = 5


def _prec(node: Node) -> int:
    if isinstance(node, Binary):
        return _PREC[node.op]
    if isinstance(node, Unary) and node.op == "neg":
        return _PREC["neg"]
    return _ATOM


def _format_const(value: float) -> str:
    if not np.isfinite(value):
        raise ValueError(f"constant {value!r} has no printed form")
    if value < 0:
        return f"({value!r})"
    if value.is_integer() and value < 1e15:
        return str(int(value))
    return repr(value)


def unparse(node: Node) -> str:
    """Print ``node`` with the minimal parentheses the grammar needs."""
    if isinstance(node, Const):
        return _format_const(node.value)
    if isinstance(node, Sym):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            inner = unparse(node.arg)
            if _prec(node.arg) < _PREC["neg"]:
                inner = f"({inner})"
            return f"-{inner}"
        return f"{node.op}({unparse(node.arg)})"
    p = _PREC[node.op]
    left, right = unparse(node.left), unparse(node.right)
    if node.op == "^":
        if _prec(node.left) <= p:
            left = f"({left})"
        if _prec(node.right) < _PREC["neg"]:
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(node.left) < p:
        left = f"({left})"
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left} {node.op} {right}"


def size(node: Node) -> int:
    if isinstance(node, Unary):
        return 1 + size(node.arg)
    if isinstance(node, Binary):
        return 1 + size(node.left) + size(node.right)
    return 1


def symbols(node: Node) -> set[Sym]:
    if isinstance(node, Sym):
        return {node}
    if isinstance(node, Unary):
        return symbols(node.arg)
    if isinstance(node, Binary):
        return symbols(node.left) | symbols(node.right)
    return set()


def control_degree(node: Node):
    """Total degree of ``node`` in the control symbols: 0, 1, or None if not affine."""
    if isinstance(node, Const):
        return 0
    if isinstance(node, Sym):
        return 1 if node.kind == "u" else 0
    if isinstance(node, Unary):
        d = control_degree(node.arg)
        if node.op == "neg":
            return d
        return 0 if d == 0 else None
    dl, dr = control_degree(node.left), control_degree(node.right)
    if dl is None or dr is None:
        return None
    if node.op in "+-":
        return max(dl, dr)
    if node.op == "*":
        return dl + dr if dl + dr <= 1 else None
    if node.op == "/":
        return dl if dr == 0 else None
    # power: affine only if nothing depends on u, or base^1
    if dl == 0 and dr == 0:
        return 0
    if dr == 0 and isinstance(node.right, Const) and node.right.value == 1.0:
        return dl
    return None


def compile_tape(node: Node, pool: list[float]) -> list[tuple[int, int]]:
    """Postfix instruction list for ``node``; constants are appended to ``pool``."""
    code: list[tuple[int, int]] = []

    def emit(nd: Node):
        if isinstance(nd, Const):
            pool.append(float(nd.value))
            code.append((_tape.CONST, len(pool) - 1))
        elif isinstance(nd, Sym):
            code.append((_tape.X if nd.kind == "x" else _tape.U, nd.index - 1))
        elif isinstance(nd, Unary):
            emit(nd.arg)
            code.append((_tape.UNARY_OPS[nd.op], 0))
        else:
            emit(nd.left)
            emit(nd.right)
            code.append((_tape.BINARY_OPS[nd.op], 0))

    emit(node)
    return code


def stack_depth(code: Sequence[tuple[int, int]]) -> int:
    depth = best = 0
    for op, _ in code:
        if op <= _tape.U:
            depth += 1
        elif op >= _tape.ADD:
            depth -= 1
        best = max(best, depth)
    return best


# ---------------------------------------------------------------------------
# public API


class Gradient(NamedTuple):
    value: np.ndarray
    nonsmooth: bool


class Expr:
    """A parsed expression bound to its declared dimensions."""

    def __init__(self, tree: Node, n: int, r: int, source: str | None = None):
        for sym in symbols(tree):
            bound = n if sym.kind == "x" else r
            if not 1 <= sym.index <= bound:
                raise UnknownSymbol(sym.name)
        self.tree = tree
        self.n = n
        self.r = r
        self.source = source if source is not None else unparse(tree)

    def __repr__(self):
        return f"Expr({self.source!r}, n={self.n}, r={self.r})"

    def __eq__(self, other):
        return isinstance(other, Expr) and (self.tree, self.n, self.r) == (other.tree, other.n, other.r)

    def __hash__(self):
        return hash((self.tree, self.n, self.r))

    @cached_property
    def _kernel(self):
        from .backend import build_kernel

        return build_kernel(self.n, self.r, [self.tree])

    def eval(self, x, u) -> float:
        return self._kernel.value(0, _vec(x, self.n), _vec(u, self.r))

    def grad_x(self, x, u) -> Gradient:
        g, flag = self._kernel.grad_x(0, _vec(x, self.n), _vec(u, self.r))
        return Gradient(np.asarray(g), bool(flag))

    def grad_u(self, x, u) -> Gradient:
        g, flag = self._kernel.grad_u(0, _vec(x, self.n), _vec(u, self.r))
        return Gradient(np.asarray(g), bool(flag))

    def unparse(self) -> str:
        return unparse(self.tree)

    @property
    def size(self) -> int:
        return size(self.tree)


def _vec(v, dim: int) -> np.ndarray:
    arr = np.ascontiguousarray(v, dtype=np.float64).reshape(-1)
    if arr.shape[0] != dim:
        raise ValueError(f"expected a vector of length {dim}, got {arr.shape[0]}")
    return arr


def parse(source: str, n: int, r: int) -> Expr:
    if not isinstance(source, str):
        raise TypeError("expression source must be text")
    tree = _Parser(source, n, r).parse()
    return Expr(tree, n, r, source)


def evaluate(expr: Expr, x, u) -> float:
    return expr.eval(x, u)


def grad_x(expr: Expr, x, u) -> Gradient:
    return expr.grad_x(x, u)
