"""
Closed-form expression grammar for forcing, initial data and exact
solutions: constants, polynomials and sin/cos/exp of x and t.
"""

from typing import Callable, Sequence

import numpy as np
import sympy as sp
from sympy.core.function import AppliedUndef
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

from errors import ConfigurationError

x, t = sp.symbols("x t", real=True)

ALLOWED_FUNCTIONS = {"sin": sp.sin, "cos": sp.cos, "exp": sp.exp}
_LOCALS = {"x": x, "t": t, "pi": sp.pi, "e": sp.E, **ALLOWED_FUNCTIONS}
_GLOBALS = {
    "__builtins__": {},
    "Integer": sp.Integer, "Float": sp.Float, "Rational": sp.Rational,
    "Symbol": sp.Symbol, "Function": sp.Function,
}
_TRANSFORMS = standard_transformations + (convert_xor,)


def parse_expression(text) -> sp.Expr:
    """Parse one scalar expression in x and t; anything else is a ConfigurationError."""
    if isinstance(text, (int, float)):
        return sp.Float(text) if isinstance(text, float) else sp.Integer(text)
    text = str(text).strip()
    if not text or "__" in text or ";" in text:
        raise ConfigurationError(f"Invalid expression {text!r}")
    try:
        expr = parse_expr(text, local_dict=dict(_LOCALS), global_dict=dict(_GLOBALS),
                          transformations=_TRANSFORMS, evaluate=True)
    except Exception as e:
        raise ConfigurationError(f"Cannot parse expression {text!r}: {e}") from e
    if not isinstance(expr, sp.Expr):
        raise ConfigurationError(f"Expression {text!r} is not a scalar formula")
    extra = expr.free_symbols - {x, t}
    if extra:
        raise ConfigurationError(f"Expression {text!r} uses unknown names {sorted(map(str, extra))}")
    undefined = expr.atoms(AppliedUndef)
    if undefined:
        raise ConfigurationError(f"Expression {text!r} calls unsupported functions {sorted(map(str, undefined))}")
    return expr


def compile_vector(exprs: Sequence) -> Callable[[float, np.ndarray], np.ndarray]:
    """f(t, x) -> array (len(x), m) for a list of m component expressions."""
    parsed = [parse_expression(e) for e in exprs]
    funcs = [sp.lambdify((t, x), e, modules="numpy") for e in parsed]

    def evaluate(tt: float, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        cols = [np.broadcast_to(np.asarray(f(float(tt), xs), dtype=float), xs.shape) for f in funcs]
        return np.stack(cols, axis=1)

    return evaluate


def compile_spatial(exprs: Sequence) -> Callable[[np.ndarray], np.ndarray]:
    """g(x) -> (len(x), m) for expressions evaluated at t = 0."""
    f = compile_vector(exprs)
    return lambda xs: f(0.0, xs)
