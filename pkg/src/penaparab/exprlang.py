"""Closed-form expression language for coefficients and data functions.

Every coefficient and data function of a problem (diffusion, convection,
reaction, boundary data, initial data) is supplied as a small arithmetic
expression in the variables ``x`` and ``t`` (plus ``u`` for the reaction
term).  Grammar, loosest to tightest binding:

    expr   := term  { ('+' | '-') term }
    term   := unary { ('*' | '/') unary }
    unary  := '-' unary | power
    power  := atom [ '^' unary ]            right associative
    atom   := NUMBER | NAME | NAME '(' expr {',' expr} ')' | '(' expr ')'

``^`` binds tighter than unary minus, so ``-2^2 == -(2^2) == -4`` and
``2^3^2 == 2^(3^2) == 512``.  ``pi`` and ``e`` are named constants.
Function arities are fixed; violations are parse-time errors.

Evaluation follows IEEE-754 double semantics: division by zero and domain
errors produce inf/nan, which propagate to the caller (the certification
stage rejects non-finite samples).  Expressions evaluate elementwise on
numpy arrays, which is how the assembly loops use them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

FUNCTIONS = {
    "sin": 1,
    "cos": 1,
    "exp": 1,
    "log": 1,
    "sqrt": 1,
    "abs": 1,
    "tanh": 1,
    "min": 2,
    "max": 2,
    "pow": 2,
}

CONSTANTS = {"pi": math.pi, "e": math.e}

_UNARY_NUMPY = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "tanh": np.tanh,
}

_BINARY_NUMPY = {
    "min": np.minimum,
    "max": np.maximum,
    "pow": np.power,
}


class ExprError(ValueError):
    """Parse or evaluation failure with the byte offset of the cause."""

    def __init__(self, message, offset=None):
        self.message = message
        self.offset = offset
        if offset is None:
            super().__init__(message)
        else:
            super().__init__(f"{message} (offset {offset})")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    child: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Expr = Num | Const | Var | Neg | BinOp | Call


# ---------------------------------------------------------------------------
# tokenizer

@dataclass(frozen=True)
class _Token:
    kind: str  # NUM NAME OP LPAR RPAR COMMA END
    text: str
    offset: int


def _tokenize(source):
    tokens = []
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch in " \t\r\n":
            i += 1
            continue
        if ch in "+-*/^":
            tokens.append(_Token("OP", ch, i))
            i += 1
        elif ch == "(":
            tokens.append(_Token("LPAR", ch, i))
            i += 1
        elif ch == ")":
            tokens.append(_Token("RPAR", ch, i))
            i += 1
        elif ch == ",":
            tokens.append(_Token("COMMA", ch, i))
            i += 1
        elif ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            start = i
            while i < n and source[i].isdigit():
                i += 1
            if i < n and source[i] == ".":
                i += 1
                while i < n and source[i].isdigit():
                    i += 1
            if i < n and source[i] in "eE":
                j = i + 1
                if j < n and source[j] in "+-":
                    j += 1
                if j < n and source[j].isdigit():
                    i = j
                    while i < n and source[i].isdigit():
                        i += 1
            text = source[start:i]
            try:
                float(text)
            except ValueError:
                raise ExprError(f"malformed number '{text}'", start) from None
            tokens.append(_Token("NUM", text, start))
        elif ch.isalpha() or ch == "_":
            start = i
            while i < n and (source[i].isalnum() or source[i] == "_"):
                i += 1
            tokens.append(_Token("NAME", source[start:i], start))
        else:
            raise ExprError(f"unexpected character '{ch}'", i)
    tokens.append(_Token("END", "", n))
    return tokens


# ---------------------------------------------------------------------------
# parser

class _Parser:
    def __init__(self, tokens, allowed_vars):
        self.tokens = tokens
        self.pos = 0
        self.allowed = frozenset(allowed_vars)

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind, what):
        tok = self.peek()
        if tok.kind != kind:
            found = tok.text if tok.text else "end of input"
            raise ExprError(f"expected {what}, found '{found}'", tok.offset)
        return self.advance()

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok.kind != "END":
            raise ExprError(f"unexpected trailing input '{tok.text}'", tok.offset)
        return node

    def expr(self):
        node = self.term()
        while self.peek().kind == "OP" and self.peek().text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek().kind == "OP" and self.peek().text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        tok = self.peek()
        if tok.kind == "OP" and tok.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        node = self.atom()
        tok = self.peek()
        if tok.kind == "OP" and tok.text == "^":
            self.advance()
            node = BinOp("^", node, self.unary())
        return node

    def atom(self):
        tok = self.peek()
        if tok.kind == "NUM":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "LPAR":
            self.advance()
            node = self.expr()
            self.expect("RPAR", "')'")
            return node
        if tok.kind == "NAME":
            self.advance()
            name = tok.text
            if self.peek().kind == "LPAR":
                if name not in FUNCTIONS:
                    raise ExprError(f"unknown function '{name}'", tok.offset)
                self.advance()
                args = [self.expr()]
                while self.peek().kind == "COMMA":
                    self.advance()
                    args.append(self.expr())
                self.expect("RPAR", "')'")
                arity = FUNCTIONS[name]
                if len(args) != arity:
                    raise ExprError(
                        f"function '{name}' takes {arity} argument(s), got {len(args)}",
                        tok.offset,
                    )
                return Call(name, tuple(args))
            if name in CONSTANTS:
                return Const(name)
            if name in FUNCTIONS:
                raise ExprError(f"function '{name}' used without arguments", tok.offset)
            if name in self.allowed:
                return Var(name)
            if name in ("x", "t", "u"):
                raise ExprError(
                    f"variable '{name}' not allowed in this context", tok.offset
                )
            raise ExprError(f"unknown identifier '{name}'", tok.offset)
        found = tok.text if tok.text else "end of input"
        raise ExprError(f"expected a value, found '{found}'", tok.offset)


def parse(source, allowed_vars):
    """Parse ``source`` into an Expr whose free variables lie in ``allowed_vars``."""
    if not isinstance(source, str):
        raise ExprError("expression source must be a string", 0)
    return _Parser(_tokenize(source), allowed_vars).parse()


# ---------------------------------------------------------------------------
# evaluation

def _eval(node, bindings):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Var):
        try:
            return bindings[node.name]
        except KeyError:
            raise KeyError(
                f"no binding supplied for variable '{node.name}'"
            ) from None
    if isinstance(node, Neg):
        return np.negative(_eval(node.child, bindings))
    if isinstance(node, BinOp):
        left = _eval(node.left, bindings)
        right = _eval(node.right, bindings)
        if node.op == "+":
            return np.add(left, right)
        if node.op == "-":
            return np.subtract(left, right)
        if node.op == "*":
            return np.multiply(left, right)
        if node.op == "/":
            return np.divide(left, right)
        return np.power(left, right)
    fn = _UNARY_NUMPY.get(node.name)
    if fn is not None:
        return fn(_eval(node.args[0], bindings))
    fn = _BINARY_NUMPY[node.name]
    return fn(_eval(node.args[0], bindings), _eval(node.args[1], bindings))


def evaluate(expr, bindings):
    """Evaluate ``expr`` at ``bindings`` (floats or numpy arrays, elementwise).

    Returns a float for scalar bindings, an ndarray otherwise.  Non-finite
    results are returned as-is.
    """
    with np.errstate(all="ignore"):
        out = _eval(expr, bindings)
    if np.ndim(out) == 0:
        return float(out)
    return np.asarray(out, dtype=float)


def free_vars(expr):
    if isinstance(expr, Var):
        return {expr.name}
    if isinstance(expr, Neg):
        return free_vars(expr.child)
    if isinstance(expr, BinOp):
        return free_vars(expr.left) | free_vars(expr.right)
    if isinstance(expr, Call):
        out = set()
        for a in expr.args:
            out |= free_vars(a)
        return out
    return set()


# ---------------------------------------------------------------------------
# pretty printing

_PREC = {"+": 10, "-": 10, "*": 20, "/": 20, "neg": 30, "^": 40}


def _prec(node):
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC["neg"]
    return 100


def to_source(node):
    """Render an Expr back to text; reparsing gives a structurally equal tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        inner = to_source(node.child)
        if _prec(node.child) < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, BinOp):
        lhs, rhs = to_source(node.left), to_source(node.right)
        p = _PREC[node.op]
        if node.op == "^":
            # right associative: parenthesize a compound base
            if _prec(node.left) <= p:
                lhs = f"({lhs})"
            if _prec(node.right) < p:
                rhs = f"({rhs})"
        else:
            if _prec(node.left) < p:
                lhs = f"({lhs})"
            if _prec(node.right) <= p:
                rhs = f"({rhs})"
        return f"{lhs}{node.op}{rhs}"
    args = ", ".join(to_source(a) for a in node.args)
    return f"{node.name}({args})"


# ---------------------------------------------------------------------------
# numeric differentiation

def diff_numeric(expr, var, bindings, h=1e-6):
    """Central difference d(expr)/d(var): (f(v+h) - f(v-h)) / (2h)."""
    if h <= 0:
        raise ExprError("differentiation step h must be positive")
    lo = dict(bindings)
    hi = dict(bindings)
    lo[var] = np.asarray(bindings[var]) - h if np.ndim(bindings[var]) else bindings[var] - h
    hi[var] = np.asarray(bindings[var]) + h if np.ndim(bindings[var]) else bindings[var] + h
    flo = evaluate(expr, lo)
    fhi = evaluate(expr, hi)
    if not (np.all(np.isfinite(flo)) and np.all(np.isfinite(fhi))):
        raise ExprError("non-finite value in difference stencil")
    return (fhi - flo) / (2.0 * h)


def diff_refined(expr, var, bindings, h=1e-6):
    """Central difference with one Richardson extrapolation step (default h)."""
    coarse = diff_numeric(expr, var, bindings, h)
    fine = diff_numeric(expr, var, bindings, h / 2.0)
    return (4.0 * fine - coarse) / 3.0


def diff_t_numeric(expr, x, t, h=1e-6):
    """d(expr)/dt at (x, t) by plain central difference."""
    return diff_numeric(expr, "t", {"x": x, "t": t}, h)
