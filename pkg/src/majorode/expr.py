"""A small closed-form expression language for coefficient functions.

Grammar (Python operator syntax, evaluated with numpy)::

    expr   := number | name | expr op expr | -expr | func(expr) | (expr)
    op     := + | - | * | / | **
    func   := sin | cos | exp
    name   := t | pi | <declared index variables such as i, j, k>

Anything else (attribute access, other calls, comparisons) is rejected at
parse time.
"""
from __future__ import annotations

import ast
import math
from typing import Callable, Iterable

import numpy as np

from .errors import ConfigError

FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
CONSTS = {"pi": math.pi}
_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
           ast.Div: np.divide, ast.Pow: np.power}


class Expr:
    """A parsed expression; call with keyword values for its variables."""

    def __init__(self, source: str, variables: Iterable[str] = ("t",)):
        self.source = str(source)
        self.variables = tuple(variables)
        try:
            tree = ast.parse(self.source.strip(), mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse expression {self.source!r}: {exc.msg}") from None
        self.names = set()
        self._fn = self._compile(tree.body)
        self.constant = not (self.names & set(self.variables))

    def _compile(self, node) -> Callable:
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            v = float(node.value)
            return lambda env: v
        if isinstance(node, ast.Name):
            name = node.id
            if name in CONSTS:
                v = CONSTS[name]
                return lambda env: v
            if name not in self.variables:
                raise ConfigError(f"unknown name {name!r} in {self.source!r}; "
                                  f"allowed: {', '.join(self.variables + tuple(CONSTS))}")
            self.names.add(name)
            return lambda env: env[name]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op = _BINOPS[type(node.op)]
            a, b = self._compile(node.left), self._compile(node.right)
            return lambda env: op(a(env), b(env))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            a = self._compile(node.operand)
            if isinstance(node.op, ast.UAdd):
                return a
            return lambda env: np.negative(a(env))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
                and node.func.id in FUNCS and len(node.args) == 1 and not node.keywords:
            fn = FUNCS[node.func.id]
            a = self._compile(node.args[0])
            return lambda env: fn(a(env))
        raise ConfigError(f"unsupported construct {ast.dump(node)[:40]}... in {self.source!r}")

    def __call__(self, **env):
        return self._fn(env)

    def __repr__(self):
        return f"Expr({self.source!r})"


def time_function(source) -> Callable[[float], float]:
    """Compile an expression in ``t`` into ``f(t)`` (numbers pass through)."""
    if isinstance(source, (int, float)):
        source = repr(float(source))
    e = Expr(source, ("t",))

    def f(t):
        out = e(t=t)
        return out if np.ndim(t) else float(out)

    if e.constant:
        v = float(e(t=0.0))
        return lambda t: np.full(np.shape(t), v) if np.ndim(t) else v
    return f


def index_function(source, variables=("k",)) -> Callable:
    """Compile an expression in index variables (e.g. ``1/k**2`` or ``4*i*j``)."""
    if isinstance(source, (int, float)):
        v = float(source)
        return lambda *args: v
    e = Expr(source, variables)
    return lambda *args: float(e(**dict(zip(variables, (float(a) for a in args)))))


def matrix_function(rows) -> Callable[[float], np.ndarray]:
    """Compile a nested list of expressions in ``t`` into ``A(t)``."""
    fns = [[time_function(c) for c in row] for row in rows]
    m = len(fns)
    if any(len(r) != m for r in fns):
        raise ConfigError("matrix must be square")

    def A(t):
        return np.array([[f(t) for f in row] for row in fns], dtype=float)

    return A


def vector_function(entries) -> Callable[[float], np.ndarray]:
    fns = [time_function(c) for c in entries]
    return lambda t: np.array([f(t) for f in fns], dtype=float)
