"""A small expression language for nonlinearities.

Grammar (highest binding first)::

    atom    := number | name | name '(' expr ')' | '(' expr ')'
    power   := atom ('^' unary)?          right associative
    unary   := '-' unary | '+' unary | power
    product := unary (('*' | '/') unary)*
    expr    := product (('+' | '-') product)*

Only ``exp`` and ``abs`` are recognised as functions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

import numpy as np

from .errors import EvaluationDomainError, ExpressionSyntaxError, UnknownIdentifierError

FUNCTIONS = {"exp": np.exp, "abs": np.abs}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>\*\*|[-+*/^()]))"
)


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Neg, BinOp, Call]


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExpressionSyntaxError(f"unexpected character {text[bad]!r}", bad, text)
        kind = m.lastgroup
        start = m.start(kind)
        value = m.group(kind)
        tokens.append((kind, "^" if value == "**" else value, start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, variables):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.variables = variables

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value or kind == "end":
            what = "end of input" if kind == "end" else repr(val)
            raise ExpressionSyntaxError(f"expected {value!r}, found {what}", pos, self.text)

    def parse(self) -> Node:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected {val!r}", pos, self.text)
        return node

    def expr(self) -> Node:
        node = self.product()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.product())
        return node

    def product(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        kind, val, _ = self.peek()
        if kind == "op" and val in ("-", "+"):
            self.take()
            arg = self.unary()
            return Neg(arg) if val == "-" else arg
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            if not self._known(val):
                raise UnknownIdentifierError(f"unknown identifier {val!r}", pos, self.text)
            return Var(val)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(val)
        raise ExpressionSyntaxError(f"unexpected {what}", pos, self.text)

    def _known(self, name: str) -> bool:
        if self.variables is None:
            return name == "t" or re.fullmatch(r"x\d+", name) is not None
        return name in self.variables


def parse(text: str, variables: Iterable[str] | None = None) -> Node:
    """Parse ``text`` into an expression tree.

    With ``variables=None`` the identifiers ``t`` and ``x0, x1, ...`` are
    accepted; otherwise only the given names are.
    """
    return _Parser(text, None if variables is None else frozenset(variables)).parse()


def to_text(node: Node) -> str:
    """Fully parenthesised rendering that parses back to the same tree."""
    if isinstance(node, Num):
        v = float(node.value)
        return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_text(node.arg)})"
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    return f"({to_text(node.left)} {node.op} {to_text(node.right)})"


def variables_of(node: Node) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, (Neg, Call)):
        return variables_of(node.arg)
    return variables_of(node.left) | variables_of(node.right)


def evaluate(node: Node, env: Mapping[str, object]):
    """Evaluate on scalars or broadcastable numpy arrays.

    A zero denominator raises :class:`EvaluationDomainError` carrying the
    offending inputs.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        return _eval(node, env)


def _eval(node: Node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise UnknownIdentifierError(f"no value bound for {node.name!r}", 0) from None
    if isinstance(node, Neg):
        return -_eval(node.arg, env)
    if isinstance(node, Call):
        return FUNCTIONS[node.func](_eval(node.arg, env))
    left = _eval(node.left, env)
    right = _eval(node.right, env)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if node.op == "/":
        zero = np.asarray(right) == 0
        if np.any(zero):
            raise EvaluationDomainError("division by zero", _offending(env, zero))
        return left / right
    base = np.asarray(left, dtype=float)
    expo = np.asarray(right, dtype=float)
    bad = (base == 0) & (expo < 0)
    if np.any(bad):
        raise EvaluationDomainError("zero raised to a negative power", _offending(env, bad))
    out = np.power(base, expo)
    return out if out.ndim else float(out)


def _offending(env, mask) -> dict:
    mask = np.asarray(mask)
    if mask.ndim == 0:
        return {k: (v.item() if isinstance(v, np.ndarray) and v.size == 1 else v) for k, v in env.items()}
    idx = tuple(np.argwhere(mask)[0])
    out = {}
    for k, v in env.items():
        arr = np.asarray(v, dtype=float)
        try:
            out[k] = float(np.broadcast_to(arr, mask.shape)[idx]) if arr.ndim else float(arr)
        except ValueError:
            out[k] = arr
    return out


def _guarded_div(left, right, env):
    if isinstance(right, float) and isinstance(left, float):
        if right == 0.0:
            raise EvaluationDomainError("division by zero", env())
        return left / right
    zero = np.asarray(right) == 0
    if np.any(zero):
        raise EvaluationDomainError("division by zero", _offending(env(), zero))
    return left / right


def _guarded_pow(left, right, env):
    base = np.asarray(left, dtype=float)
    expo = np.asarray(right, dtype=float)
    bad = (base == 0) & (expo < 0)
    if np.any(bad):
        raise EvaluationDomainError("zero raised to a negative power", _offending(env(), bad))
    out = np.power(base, expo)
    return out if out.ndim else float(out)


def _source(node: Node) -> str:
    if isinstance(node, Num):
        v = float(node.value)
        return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{_source(node.arg)})"
    if isinstance(node, Call):
        return f"_{node.func}({_source(node.arg)})"
    left, right = _source(node.left), _source(node.right)
    if node.op == "/":
        return f"_div({left}, {right}, _env)"
    if node.op == "^":
        if isinstance(node.right, Num) and node.right.value >= 0:
            return f"_power({left}, {right})"
        return f"_pow({left}, {right}, _env)"
    return f"({left} {node.op} {right})"


def compile_tree(node: Node, variables: Iterable[str]):
    """Turn a tree into a positional function of ``variables``.

    Same semantics as :func:`evaluate`, without the per-node dispatch cost.
    """
    names = list(variables)
    missing = variables_of(node) - set(names)
    if missing:
        raise UnknownIdentifierError(f"no value bound for {sorted(missing)[0]!r}", 0)
    args = ", ".join(names)
    env_src = "{" + ", ".join(f"{n!r}: {n}" for n in names) + "}"
    src = (f"def _f({args}):\n"
           f"    _env = lambda: {env_src}\n"
           f"    with _errstate(over='ignore', invalid='ignore'):\n"
           f"        return {_source(node)}\n")
    scope = {"_div": _guarded_div, "_pow": _guarded_pow, "_power": np.power, "_errstate": np.errstate,
             **{f"_{k}": v for k, v in FUNCTIONS.items()}}
    exec(compile(src, "<expression>", "exec"), scope)
    return scope["_f"]
