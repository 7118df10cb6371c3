"""Arithmetic expression language for user-supplied model functions.

Grammar (whitespace is insignificant)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := number | ident | ident '(' expr ')' | '(' expr ')'

``^`` is right-associative and binds tighter than unary minus, so
``-Y^2`` is ``-(Y^2)`` and ``2^-1`` is ``0.5``.  Numbers are decimal with an
optional exponent.  Functions: exp, ln, tanh, sin, cos, sqrt, abs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Iterable, Optional, Union

import numpy as np

from .errors import ExprDomainError, ExprSyntaxError, UnknownFunction, UnknownIdentifier

__all__ = [
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "Expr",
    "parse_expr",
    "eval_expr",
    "to_source",
    "compile_expr",
    "DEFAULT_VARIABLES",
    "FUNCTIONS",
]

DEFAULT_VARIABLES: FrozenSet[str] = frozenset({"Y", "R", "i", "x", "y"})
FUNCTIONS = ("exp", "ln", "tanh", "sin", "cos", "sqrt", "abs")


@dataclass(frozen=True)
class Num:
    value: float
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Neg:
    operand: "Node"
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"
    offset: int = field(default=0, compare=False)


Node = Union[Num, Var, Neg, BinOp, Call]

_ATOM_START = ("number", "identifier", "'('", "'-'")


class _Parser:
    def __init__(self, src: str, variables: Iterable[str]):
        self.src = src
        self.pos = 0
        self.variables = frozenset(variables)

    def _skip(self) -> None:
        # ASCII whitespace only, so character offsets equal byte offsets
        while self.pos < len(self.src) and self.src[self.pos] in " \t\r\n\f\v":
            self.pos += 1

    def _peek(self) -> str:
        self._skip()
        return self.src[self.pos] if self.pos < len(self.src) else ""

    def _fail(self, expected):
        self._skip()
        if self.pos >= len(self.src):
            raise ExprSyntaxError("unexpected end of input", self.pos, expected)
        raise ExprSyntaxError(f"unexpected {self.src[self.pos]!r}", self.pos, expected)

    def parse(self) -> Node:
        node = self.expr()
        if self._peek():
            self._fail(("operator", "end of input"))
        return node

    def expr(self) -> Node:
        node = self.term()
        while self._peek() in ("+", "-"):
            at = self.pos
            op = self.src[self.pos]
            self.pos += 1
            node = BinOp(op, node, self.term(), at)
        return node

    def term(self) -> Node:
        node = self.unary()
        while self._peek() in ("*", "/"):
            at = self.pos
            op = self.src[self.pos]
            self.pos += 1
            node = BinOp(op, node, self.unary(), at)
        return node

    def unary(self) -> Node:
        if self._peek() == "-":
            at = self.pos
            self.pos += 1
            return Neg(self.unary(), at)
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self._peek() == "^":
            at = self.pos
            self.pos += 1
            return BinOp("^", base, self.unary(), at)
        return base

    def atom(self) -> Node:
        c = self._peek()
        at = self.pos
        if c == "(":
            self.pos += 1
            node = self.expr()
            if self._peek() != ")":
                self._fail(("')'",))
            self.pos += 1
            return node
        if c and c in "0123456789.":
            return self.number()
        if c and (c.isascii() and (c.isalpha() or c == "_")):
            name = self.ident()
            if self._peek() == "(":
                if name not in FUNCTIONS:
                    raise UnknownFunction(f"unknown function {name!r}", at, FUNCTIONS)
                self.pos += 1
                arg = self.expr()
                if self._peek() != ")":
                    self._fail(("')'",))
                self.pos += 1
                return Call(name, arg, at)
            if name in FUNCTIONS:
                self._fail(("'('",))
            if name not in self.variables:
                raise UnknownIdentifier(f"unknown identifier {name!r}", at, sorted(self.variables))
            return Var(name, at)
        self._fail(_ATOM_START)

    def ident(self) -> str:
        start = self.pos
        while self.pos < len(self.src) and self.src[self.pos].isascii() and (self.src[self.pos].isalnum() or self.src[self.pos] == "_"):
            self.pos += 1
        return self.src[start : self.pos]

    def number(self) -> Num:
        s, start = self.src, self.pos
        n = len(s)
        digits = "0123456789"
        while self.pos < n and s[self.pos] in digits:
            self.pos += 1
        if self.pos < n and s[self.pos] == ".":
            self.pos += 1
            while self.pos < n and s[self.pos] in digits:
                self.pos += 1
        if s[start : self.pos] == ".":
            raise ExprSyntaxError("malformed number", start, ("digit",))
        if self.pos < n and s[self.pos] in "eE":
            self.pos += 1
            if self.pos < n and s[self.pos] in "+-":
                self.pos += 1
            if not (self.pos < n and s[self.pos] in digits):
                raise ExprSyntaxError("malformed exponent", self.pos, ("digit",))
            while self.pos < n and s[self.pos] in digits:
                self.pos += 1
        value = float(s[start : self.pos])
        if not math.isfinite(value):
            raise ExprSyntaxError("number out of range", start)
        return Num(value, start)


def parse_expr(src: str, variables: Iterable[str] = DEFAULT_VARIABLES) -> Node:
    """Parse ``src`` into an AST.

    Raises
    ------
    ExprSyntaxError
        With the 0-based offset of the offending character (or the input
        length at end of input) and the set of expected tokens.
    UnknownIdentifier, UnknownFunction
        For names outside ``variables`` or the function table.
    """
    return _Parser(src, variables).parse()


# precedence levels for printing
_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC["neg"]
    return 5


def to_source(node: Node) -> str:
    """Print ``node`` with the minimal parentheses that reparse to the same tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    if isinstance(node, Neg):
        inner = to_source(node.operand)
        return f"-{inner}" if _prec(node.operand) >= 3 else f"-({inner})"
    p = _PREC[node.op]
    left, right = to_source(node.left), to_source(node.right)
    if node.op == "^":
        if _prec(node.left) <= 4:
            left = f"({left})"
        if _prec(node.right) < 3:
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(node.left) < p:
        left = f"({left})"
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left} {node.op} {right}"


def _check(value: float, node: Node, what: str) -> float:
    if not math.isfinite(value):
        raise ExprDomainError(f"{what} is not finite", node.offset)
    return value


def _scalar_call(node: Call, x: float) -> float:
    name = node.func
    if name == "ln":
        if x <= 0:
            raise ExprDomainError(f"ln of non-positive value {x!r}", node.offset)
        return math.log(x)
    if name == "sqrt":
        if x < 0:
            raise ExprDomainError(f"sqrt of negative value {x!r}", node.offset)
        return math.sqrt(x)
    if name == "exp":
        try:
            return math.exp(x)
        except OverflowError:
            raise ExprDomainError("exp overflow", node.offset) from None
    return {"tanh": math.tanh, "sin": math.sin, "cos": math.cos, "abs": abs}[name](x)


def eval_expr(node: Node, bindings: Dict[str, float]) -> float:
    """Evaluate ``node`` with scalar ``bindings``.

    Raises
    ------
    ExprDomainError
        For ln/sqrt outside their domain, division by zero, invalid powers
        or non-finite intermediate results; carries the node's offset.
    KeyError
        If a variable is unbound.
    """
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return float(bindings[node.name])
    if isinstance(node, Neg):
        return -eval_expr(node.operand, bindings)
    if isinstance(node, Call):
        return _check(_scalar_call(node, eval_expr(node.arg, bindings)), node, node.func)
    a = eval_expr(node.left, bindings)
    b = eval_expr(node.right, bindings)
    if node.op == "+":
        return _check(a + b, node, "sum")
    if node.op == "-":
        return _check(a - b, node, "difference")
    if node.op == "*":
        return _check(a * b, node, "product")
    if node.op == "/":
        if b == 0.0:
            raise ExprDomainError("division by zero", node.offset)
        return _check(a / b, node, "quotient")
    try:
        return _check(math.pow(a, b), node, "power")
    except (ValueError, ZeroDivisionError):
        raise ExprDomainError(f"invalid power {a!r}^{b!r}", node.offset) from None
    except OverflowError:
        raise ExprDomainError("power overflow", node.offset) from None


_NP_FUNCS = {"exp": np.exp, "ln": np.log, "tanh": np.tanh, "sin": np.sin, "cos": np.cos, "sqrt": np.sqrt, "abs": np.abs}


def _compile_array(node: Node) -> Callable[[Dict[str, np.ndarray]], np.ndarray]:
    if isinstance(node, Num):
        v = node.value
        return lambda b: v
    if isinstance(node, Var):
        name = node.name
        return lambda b: b[name]
    if isinstance(node, Neg):
        inner = _compile_array(node.operand)
        return lambda b: -inner(b)
    if isinstance(node, Call):
        fn = _NP_FUNCS[node.func]
        inner = _compile_array(node.arg)
        return lambda b: fn(inner(b))
    left, right = _compile_array(node.left), _compile_array(node.right)
    op = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide, "^": np.power}[node.op]
    return lambda b: op(left(b), right(b))


def compile_expr(node: Node) -> Callable[..., Union[float, np.ndarray]]:
    """Callable ``fn(**bindings)``.

    Scalar bindings go through :func:`eval_expr` (domain errors raise);
    array bindings are evaluated with numpy, invalid entries becoming nan.
    """
    arr = _compile_array(node)

    def fn(**bindings):
        if all(np.ndim(v) == 0 for v in bindings.values()):
            return eval_expr(node, bindings)
        with np.errstate(all="ignore"):
            b = {k: np.asarray(v, dtype=float) for k, v in bindings.items()}
            out = np.asarray(arr(b), dtype=float)
            return np.where(np.isfinite(out), out, np.nan)

    return fn


@dataclass(frozen=True)
class Expr:
    """Parsed expression with its source text."""

    source: str
    ast: Node
    variables: FrozenSet[str] = DEFAULT_VARIABLES

    @classmethod
    def parse(cls, source: str, variables: Optional[Iterable[str]] = None) -> "Expr":
        vs = DEFAULT_VARIABLES if variables is None else frozenset(variables)
        return cls(source, parse_expr(source, vs), vs)

    def __post_init__(self):
        object.__setattr__(self, "_fn", compile_expr(self.ast))

    def __call__(self, **bindings):
        return self._fn(**bindings)

    def __str__(self) -> str:
        return to_source(self.ast)
