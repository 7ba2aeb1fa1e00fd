"""Arithmetic expressions for kernels, nonlinearities and growth functions.

Grammar, loosest binding first::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right associative
    atom   := NUMBER | NAME | FUNC '(' expr (',' expr)* ')' | '(' expr ')'

Evaluation works on Python floats and on numpy arrays alike; variables are
broadcast against each other.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

FUNCTIONS = {
    "sin": (1, 1),
    "cos": (1, 1),
    "exp": (1, 1),
    "abs": (1, 1),
    "sqrt": (1, 1),
    "ln": (1, 1),
    "min": (2, None),
    "max": (2, None),
}

MAX_DEPTH = 200  # tree height
MAX_NESTING = 64  # parentheses, unary minus and exponents; each level costs ~5 frames


class ParseError(ValueError):
    def __init__(self, position: int, message: str, token: str = ""):
        self.position = position
        self.message = message
        self.token = token
        super().__init__(f"{message} at byte {position}" + (f" (near {token!r})" if token else ""))


class DomainError(ArithmeticError):
    """Raised when evaluation leaves the real domain (sqrt(-1), ln(0), 1/0, ...).

    ``expr`` is the offending subexpression as text; ``index`` is the first
    offending position within the broadcast evaluation shape, or None for
    scalar evaluation.
    """

    def __init__(self, message: str, expr: "Expr", index=None):
        self.expr = expr
        self.index = index
        where = f" at index {index}" if index is not None else ""
        super().__init__(f"{message} in '{to_string(expr)}'{where}")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Expr = Union[Num, Var, Neg, BinOp, Call]
EXPR_TYPES = (Num, Var, Neg, BinOp, Call)


# -- tokenizer --------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # number | name | op | eof
    text: str
    pos: int  # byte offset into the UTF-8 encoding of the input


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    i = 0
    byte_pos = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise ParseError(byte_pos, "unexpected character", text[i])
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), byte_pos))
        byte_pos += len(m.group().encode("utf-8"))
        i = m.end()
    tokens.append(_Token("eof", "", byte_pos))
    return tokens


def _children(e):
    if isinstance(e, Neg):
        return (e.operand,)
    if isinstance(e, BinOp):
        return (e.left, e.right)
    if isinstance(e, Call):
        return e.args
    return ()


def _height(e) -> int:
    # iterative: long operator chains build left-deep trees
    best = 0
    stack = [(e, 1)]
    while stack:
        node, h = stack.pop()
        best = max(best, h)
        stack.extend((c, h + 1) for c in _children(node))
    return best


# -- parser -----------------------------------------------------------------

class _Parser:
    def __init__(self, text: str, allowed_vars):
        self.tokens = _tokenize(text)
        self.i = 0
        self.allowed = frozenset(allowed_vars)
        self.depth = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Token:
        if self.tok.text != text or self.tok.kind != "op":
            raise self.error(f"expected '{text}'")
        return self.advance()

    def error(self, message: str) -> ParseError:
        t = self.tok
        if t.kind == "eof":
            return ParseError(t.pos, message + ", found end of input")
        return ParseError(t.pos, message, t.text)

    def enter(self):
        self.depth += 1
        if self.depth > MAX_NESTING:
            raise self.error("expression nested too deeply")

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "eof":
            raise self.error("unexpected token")
        if _height(e) > MAX_DEPTH:
            raise ParseError(0, f"expression tree deeper than {MAX_DEPTH} levels")
        return e

    def expr(self) -> Expr:
        self.enter()
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            left = BinOp(op, left, self.term())
        self.depth -= 1
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            left = BinOp(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            self.enter()
            operand = self.unary()
            self.depth -= 1
            return Neg(operand)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            self.enter()
            exponent = self.unary()
            self.depth -= 1
            return BinOp("^", base, exponent)
        return base

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "number":
            self.advance()
            value = float(t.text)
            if not math.isfinite(value):
                raise ParseError(t.pos, "numeric literal out of range", t.text)
            return Num(value)
        if t.kind == "name":
            self.advance()
            if t.text in FUNCTIONS:
                return self.call(t)
            if self.tok.kind == "op" and self.tok.text == "(":
                raise ParseError(t.pos, "unknown function", t.text)
            if t.text not in self.allowed:
                allowed = ", ".join(sorted(self.allowed)) or "none"
                raise ParseError(t.pos, f"variable not allowed here (allowed: {allowed})", t.text)
            return Var(t.text)
        if t.kind == "op" and t.text == "(":
            self.advance()
            inner = self.expr()
            self.expect(")")
            return inner
        raise self.error("expected a number, variable, function call or '('")

    def call(self, name_tok: _Token) -> Expr:
        if not (self.tok.kind == "op" and self.tok.text == "("):
            raise ParseError(name_tok.pos, "function name must be followed by '('", name_tok.text)
        self.advance()
        args = [self.expr()]
        while self.tok.kind == "op" and self.tok.text == ",":
            self.advance()
            args.append(self.expr())
        self.expect(")")
        lo, hi = FUNCTIONS[name_tok.text]
        if len(args) < lo or (hi is not None and len(args) > hi):
            want = str(lo) if lo == hi else f"at least {lo}"
            raise ParseError(
                name_tok.pos, f"{name_tok.text} takes {want} argument(s), got {len(args)}", name_tok.text
            )
        return Call(name_tok.text, tuple(args))


def parse(text: str, allowed_vars=("t", "s", "u", "y", "k")) -> Expr:
    if not isinstance(text, str):
        raise ParseError(0, f"expression must be text, got {type(text).__name__}")
    return _Parser(text, allowed_vars).parse()


# -- printing and inspection ------------------------------------------------

def to_string(e: Expr) -> str:
    """Fully parenthesised rendering; ``parse(to_string(e)) == e``."""
    if isinstance(e, Num):
        return repr(e.value) if e.value >= 0 else f"(-{-e.value!r})"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_string(e.operand)})"
    if isinstance(e, BinOp):
        return f"({to_string(e.left)} {e.op} {to_string(e.right)})"
    if isinstance(e, Call):
        return f"{e.name}({', '.join(to_string(a) for a in e.args)})"
    raise TypeError(f"not an expression node: {e!r}")


def free_vars(e: Expr) -> frozenset:
    if isinstance(e, Var):
        return frozenset([e.name])
    if isinstance(e, Num):
        return frozenset()
    if isinstance(e, Neg):
        return free_vars(e.operand)
    if isinstance(e, BinOp):
        return free_vars(e.left) | free_vars(e.right)
    return frozenset().union(*(free_vars(a) for a in e.args))


def substitute(e: Expr, name: str, replacement: Expr) -> Expr:
    if isinstance(e, Var):
        return replacement if e.name == name else e
    if isinstance(e, Num):
        return e
    if isinstance(e, Neg):
        return Neg(substitute(e.operand, name, replacement))
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, name, replacement), substitute(e.right, name, replacement))
    return Call(e.name, tuple(substitute(a, name, replacement) for a in e.args))


# -- evaluation -------------------------------------------------------------

def _check(mask, message, node):
    mask = np.asarray(mask)
    if mask.any():
        index = None
        if mask.ndim:
            index = tuple(int(i) for i in np.unravel_index(int(np.argmax(mask)), mask.shape))
        raise DomainError(message, node, index)


def _eval(e: Expr, env):
    if isinstance(e, Num):
        return np.float64(e.value)
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise KeyError(f"no binding for variable {e.name!r}") from None
    if isinstance(e, Neg):
        return -_eval(e.operand, env)
    if isinstance(e, BinOp):
        a = _eval(e.left, env)
        b = _eval(e.right, env)
        op = e.op
        if op == "+":
            r = a + b
        elif op == "-":
            r = a - b
        elif op == "*":
            r = a * b
        elif op == "/":
            _check(np.asarray(b) == 0, "division by zero", e)
            r = a / b
        else:
            neg_base = np.asarray(a) < 0
            _check(neg_base & (np.asarray(b) != np.floor(b)),
                   "negative base with non-integer exponent", e)
            _check((np.asarray(a) == 0) & (np.asarray(b) < 0), "zero raised to a negative power", e)
            r = np.power(a, b)
        _check(~np.isfinite(r), "non-finite result", e)
        return r
    args = [_eval(a, env) for a in e.args]
    name = e.name
    x = args[0]
    if name == "sqrt":
        _check(np.asarray(x) < 0, "sqrt of negative number", e)
        r = np.sqrt(x)
    elif name == "ln":
        _check(np.asarray(x) <= 0, "ln of nonpositive number", e)
        r = np.log(x)
    elif name == "exp":
        r = np.exp(x)
    elif name == "sin":
        r = np.sin(x)
    elif name == "cos":
        r = np.cos(x)
    elif name == "abs":
        r = np.abs(x)
    elif name == "min":
        r = args[0]
        for a in args[1:]:
            r = np.minimum(r, a)
    else:
        r = args[0]
        for a in args[1:]:
            r = np.maximum(r, a)
    _check(~np.isfinite(r), "non-finite result", e)
    return r


def evaluate(e: Expr, bindings: Mapping[str, object]):
    """Evaluate in IEEE double precision.

    Scalar bindings give a float; array bindings give an array with the
    broadcast shape of the variables that occur in ``e`` (constants broadcast
    as scalars, callers use ``np.broadcast_to`` when they need a full array).
    """
    env = {}
    for k, v in bindings.items():
        arr = np.asarray(v, dtype=float)
        env[k] = arr if arr.ndim else np.float64(arr)
    with np.errstate(all="ignore"):
        r = _eval(e, env)
    if np.ndim(r) == 0:
        return float(r)
    return r
