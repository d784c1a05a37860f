"""Minimal arithmetic expressions for metrics, fields and stratum embeddings.

Grammar: numbers, variables, ``+ - * / ^`` (``**`` also accepted), unary minus,
parentheses and the functions ``sin cos tan exp log sqrt``; the constant ``pi``.
Expressions are parsed with :mod:`ast` and only whitelisted nodes are accepted,
so nothing is ever executed as Python.
"""

from __future__ import annotations

import ast
from typing import Callable, Iterable, Mapping

import numpy as np

FUNCTIONS: dict[str, Callable] = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
}
CONSTANTS = {"pi": np.pi}


class ExpressionError(ValueError):
    pass


_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


def _compile(node: ast.AST, names: frozenset[str], src: str) -> Callable[[Mapping], object]:
    if isinstance(node, ast.Expression):
        return _compile(node.body, names, src)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        value = float(node.value)
        return lambda env: value
    if isinstance(node, ast.Name):
        if node.id in CONSTANTS:
            value = CONSTANTS[node.id]
            return lambda env: value
        if node.id not in names:
            raise ExpressionError(f"unknown variable {node.id!r} in {src!r}; allowed: {sorted(names)}")
        key = node.id
        return lambda env: env[key]
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        left, right = _compile(node.left, names, src), _compile(node.right, names, src)
        return lambda env: op(left(env), right(env))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _compile(node.operand, names, src)
        if isinstance(node.op, ast.USub):
            return lambda env: np.negative(inner(env))
        return inner
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        fn = FUNCTIONS.get(node.func.id)
        if fn is None:
            raise ExpressionError(f"unknown function {node.func.id!r} in {src!r}")
        if len(node.args) != 1:
            raise ExpressionError(f"{node.func.id} takes one argument in {src!r}")
        arg = _compile(node.args[0], names, src)
        return lambda env: fn(arg(env))
    raise ExpressionError(f"unsupported syntax {ast.dump(node)[:40]!r} in {src!r}")


def compile_expression(src: str, variables: Iterable[str]) -> Callable[[Mapping], np.ndarray]:
    """Compile ``src`` into ``f(env)``; ``env`` maps variable names to arrays."""
    if not isinstance(src, str):
        raise ExpressionError(f"expression must be a string, got {type(src).__name__}")
    try:
        # ``^`` is exponentiation with the usual precedence, not Python's xor
        tree = ast.parse(src.strip().replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {src!r}: {exc.msg}") from None
    fn = _compile(tree, frozenset(variables), src)

    def evaluate(env: Mapping) -> np.ndarray:
        shape = np.shape(next(iter(env.values()))) if env else ()
        return np.broadcast_to(np.asarray(fn(env), dtype=float), shape).copy()

    return evaluate


def evaluate_constant(src: str | float) -> float:
    """Expressions without variables, e.g. ``"pi/2"`` in configs."""
    if isinstance(src, (int, float)):
        return float(src)
    return float(compile_expression(src, ())({}))
