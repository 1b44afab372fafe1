"""Right-hand sides given as polynomials in ``x`` and ``y``."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import sympy as sp

_X, _Y = sp.symbols("x y")


@dataclass
class Source:
    """A polynomial source ``f(x, y)`` with known total degree."""

    expr: sp.Expr
    degree: int
    _fn: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self._fn = sp.lambdify((_X, _Y), self.expr, "numpy")

    def __call__(self, x, y):
        x = np.asarray(x, float)
        return np.broadcast_to(np.asarray(self._fn(x, np.asarray(y, float)), float), x.shape).copy()

    def __str__(self):
        return f"poly:{sp.sstr(self.expr)}"

    @property
    def is_zero(self) -> bool:
        return self.expr == 0


def polynomial(text) -> Source:
    """Parse a polynomial in ``x`` and ``y`` such as ``"1"`` or ``"x*y - 2"``."""
    expr = sp.sympify(str(text), locals={"x": _X, "y": _Y})
    if expr.free_symbols - {_X, _Y}:
        raise ValueError(f"unexpected symbols in {text!r}")
    try:
        deg = 0 if expr == 0 else sp.Poly(expr, _X, _Y).total_degree()
    except sp.PolynomialError:
        raise ValueError(f"{text!r} is not a polynomial") from None
    return Source(sp.expand(expr), int(deg))


def parse_source(spec: str) -> Source:
    """``"poly:<expression>"``; a bare expression is accepted as well."""
    spec = spec.strip()
    if spec.startswith("poly:"):
        spec = spec[5:]
    return polynomial(spec)


def manufactured(u_text: str) -> tuple[Source, sp.Expr]:
    """``(f, u)`` with ``f = -Δu`` for a polynomial ``u``."""
    u = sp.sympify(u_text, locals={"x": _X, "y": _Y})
    f = -(sp.diff(u, _X, 2) + sp.diff(u, _Y, 2))
    return polynomial(sp.sstr(sp.expand(f))), u
