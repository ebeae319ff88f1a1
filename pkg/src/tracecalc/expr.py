"""Closed-form expression trees over a small fixed grammar.

Every pointwise quantity in this package (half-line integrand cores,
matrix entries of suspended families) is a tree over the grammar

    expr   := term (("+"|"-") term)*
    term   := factor (("*"|"/") factor)*
    factor := unary (("^"|"**") factor)?          # power, right associative
    unary  := ("+"|"-") unary | atom
    atom   := NUMBER | "i" | VAR | FUNC "(" expr ")" | "(" expr ")"
    FUNC   := exp | log | sin | cos | sqrt | phi
    VAR    := x | t1 | t2

with complex constants (``i`` is the imaginary unit) and real or complex
exponents.  ``phi`` is the fixed smoothed step: identically 0 on
[0, 1/2], identically 1 on [1, oo), built from exp(-1/t).  Its first two
derivatives are primitives of the grammar so that expressions stay
closed under the differentiations used elsewhere.

Evaluation is numpy-vectorized: ``evaluate(e, x=grid)`` accepts scalars
or arrays and returns complex values.  Powers use the principal branch
on positive bases; evaluation raises ``SingularExpressionError`` when a
non-finite value is produced at a requested point.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

__all__ = [
    "Expr", "Const", "Var", "Add", "Mul", "Pow", "Func",
    "const", "var", "add", "sub", "mul", "div", "neg", "pow_",
    "exp", "log", "sin", "cos", "sqrt", "phi", "one", "zero", "imag_unit",
    "evaluate", "diff", "substitute", "antiderivative", "as_polynomial",
    "parse", "to_text",
    "SingularExpressionError", "UnrepresentableCoreError", "NonDifferentiableError",
    "phi_num", "dphi_num", "d2phi_num",
]

Number = Union[int, float, complex]


class SingularExpressionError(ArithmeticError):
    """Expression evaluated at a point where it is singular."""


class UnrepresentableCoreError(ValueError):
    """The grammar cannot express the requested closed form."""


class NonDifferentiableError(ValueError):
    """No symbolic derivative available (third cutoff derivative)."""


# --------------------------------------------------------------------------
# the fixed cutoff and its derivatives
# --------------------------------------------------------------------------

def _psi(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = t > 0
    out[m] = np.exp(-1.0 / t[m])
    return out


def _dpsi(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = t > 0
    out[m] = np.exp(-1.0 / t[m]) / t[m] ** 2
    return out


def _d2psi(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = t > 0
    out[m] = np.exp(-1.0 / t[m]) * (1.0 / t[m] ** 4 - 2.0 / t[m] ** 3)
    return out


def phi_num(x):
    """Smoothed step: 0 on [0, 1/2], 1 on [1, oo), smooth in between."""
    x = np.asarray(np.real(x), dtype=float)
    u = _psi(2 * x - 1)
    v = _psi(2 - 2 * x)
    s = u + v
    # s >= psi(1/2) > 0 everywhere since u + v covers the unit interval
    return u / s


def dphi_num(x):
    x = np.asarray(np.real(x), dtype=float)
    u, v = 2 * x - 1, 2 - 2 * x
    pu, pv = _psi(u), _psi(v)
    s = pu + pv
    num = _dpsi(u) * pv + pu * _dpsi(v)
    return 2.0 * num / s ** 2


def d2phi_num(x):
    x = np.asarray(np.real(x), dtype=float)
    u, v = 2 * x - 1, 2 - 2 * x
    pu, pv = _psi(u), _psi(v)
    du, dv = _dpsi(u), _dpsi(v)
    s = pu + pv
    n = du * pv + pu * dv
    dn = 2 * (_d2psi(u) * pv - pu * _d2psi(v))
    ds = 2 * (du - dv)
    return 2.0 * (dn * s - 2 * n * ds) / s ** 3


_FUNC_NUM = {
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "sqrt": np.sqrt,
    "phi": phi_num,
    "dphi": dphi_num,
    "d2phi": d2phi_num,
}


# --------------------------------------------------------------------------
# nodes
# --------------------------------------------------------------------------

class Expr:
    __slots__ = ()

    def __add__(self, other):
        return add(self, _coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __pow__(self, other):
        return pow_(self, _coerce(other))

    def __neg__(self):
        return neg(self)


@dataclass(frozen=True, slots=True)
class Const(Expr):
    value: complex


@dataclass(frozen=True, slots=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, slots=True)
class Add(Expr):
    args: tuple


@dataclass(frozen=True, slots=True)
class Mul(Expr):
    args: tuple


@dataclass(frozen=True, slots=True)
class Pow(Expr):
    base: Expr
    expo: Expr


@dataclass(frozen=True, slots=True)
class Func(Expr):
    name: str
    arg: Expr


def _coerce(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, float, complex, np.integer, np.floating, np.complexfloating)):
        return Const(complex(v))
    raise TypeError(f"cannot coerce {type(v)!r} to Expr")


def const(v: Number) -> Expr:
    return Const(complex(v))


def var(name: str) -> Expr:
    return Var(name)


zero = Const(0j)
one = Const(1 + 0j)
imag_unit = Const(1j)


def _is_const(e: Expr, v=None) -> bool:
    if not isinstance(e, Const):
        return False
    return True if v is None else e.value == v


def add(*args) -> Expr:
    flat: list[Expr] = []
    csum = 0j
    for a in map(_coerce, args):
        if isinstance(a, Add):
            flat.extend(a.args)
        elif isinstance(a, Const):
            csum += a.value
        else:
            flat.append(a)
    # fold constants hiding inside flattened args
    rest = []
    for a in flat:
        if isinstance(a, Const):
            csum += a.value
        else:
            rest.append(a)
    if csum != 0:
        rest.append(Const(csum))
    if not rest:
        return zero
    if len(rest) == 1:
        return rest[0]
    return Add(tuple(rest))


def mul(*args) -> Expr:
    flat: list[Expr] = []
    cprod = 1 + 0j
    for a in map(_coerce, args):
        if isinstance(a, Mul):
            flat.extend(a.args)
        else:
            flat.append(a)
    rest = []
    for a in flat:
        if isinstance(a, Const):
            cprod *= a.value
        else:
            rest.append(a)
    if cprod == 0:
        return zero
    if cprod != 1:
        rest.insert(0, Const(cprod))
    if not rest:
        return one
    if len(rest) == 1:
        return rest[0]
    return Mul(tuple(rest))


def neg(a) -> Expr:
    return mul(Const(-1 + 0j), _coerce(a))


def sub(a, b) -> Expr:
    return add(_coerce(a), neg(b))


def div(a, b) -> Expr:
    b = _coerce(b)
    if isinstance(b, Const):
        if b.value == 0:
            raise ZeroDivisionError("division by constant zero")
        return mul(_coerce(a), Const(1.0 / b.value))
    return mul(_coerce(a), pow_(b, Const(-1 + 0j)))


def pow_(base, expo) -> Expr:
    base, expo = _coerce(base), _coerce(expo)
    if _is_const(expo, 0):
        return one
    if _is_const(expo, 1):
        return base
    if isinstance(base, Const) and isinstance(expo, Const):
        return Const(complex(base.value) ** complex(expo.value))
    if _is_const(base, 1):
        return one
    if isinstance(base, Pow) and isinstance(base.expo, Const) and isinstance(expo, Const):
        return Pow(base.base, Const(base.expo.value * expo.value))
    return Pow(base, expo)


def _func(name):
    def build(arg) -> Expr:
        arg = _coerce(arg)
        if isinstance(arg, Const) and name in ("exp", "sin", "cos"):
            f = {"exp": np.exp, "sin": np.sin, "cos": np.cos}[name]
            return Const(complex(f(arg.value)))
        return Func(name, arg)

    return build


exp = _func("exp")
log = _func("log")
sin = _func("sin")
cos = _func("cos")
phi = _func("phi")


def sqrt(a) -> Expr:
    return pow_(a, Const(0.5))


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------

def evaluate(e: Expr, env: Mapping[str, object] | None = None, *, check=True, **vars_):
    """Evaluate ``e`` with variables bound to scalars or numpy arrays.

    Returns complex scalars for scalar input, complex ndarrays otherwise.
    With ``check`` (default) a non-finite result raises
    ``SingularExpressionError``.
    """
    bindings = dict(env or {})
    bindings.update(vars_)
    scalar = all(np.ndim(v) == 0 for v in bindings.values())
    if scalar:
        try:
            out = _eval_scalar(e, {k: complex(v) for k, v in bindings.items()})
        except (ZeroDivisionError, ValueError, OverflowError) as err:
            raise SingularExpressionError(str(err)) from None
        if check and not (math.isfinite(out.real) and math.isfinite(out.imag)):
            raise SingularExpressionError("expression is singular at a requested point")
        return out
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = _eval(e, bindings)
    if check:
        bad = ~np.isfinite(np.asarray(out))
        if np.any(bad):
            raise SingularExpressionError("expression is singular at a requested point")
    if np.ndim(out) == 0:
        return complex(out)
    return out


def _eval_scalar(e: Expr, env) -> complex:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Add):
        out = 0j
        for a in e.args:
            out += _eval_scalar(a, env)
        return out
    if isinstance(e, Mul):
        out = 1 + 0j
        for a in e.args:
            out *= _eval_scalar(a, env)
        return out
    if isinstance(e, Pow):
        b = _eval_scalar(e.base, env)
        p = _eval_scalar(e.expo, env)
        if b == 0:
            if p.real > 0 and p.imag == 0:
                return 0j
            raise ZeroDivisionError("zero base with nonpositive exponent")
        return b ** p
    if isinstance(e, Func):
        a = _eval_scalar(e.arg, env)
        name = e.name
        if name == "exp":
            return cmath.exp(a)
        if name == "log":
            if a == 0:
                raise ZeroDivisionError("log 0")
            return cmath.log(a)
        if name == "sin":
            return cmath.sin(a)
        if name == "cos":
            return cmath.cos(a)
        if name == "sqrt":
            return cmath.sqrt(a)
        # cutoff family: real argument by construction
        return complex(_SCALAR_CUTOFF[name](a.real))
    raise TypeError(f"unknown node {e!r}")


def _psi_s(t: float) -> float:
    return math.exp(-1.0 / t) if t > 0 else 0.0


def _dpsi_s(t: float) -> float:
    return math.exp(-1.0 / t) / (t * t) if t > 0 else 0.0


def _d2psi_s(t: float) -> float:
    if t <= 0:
        return 0.0
    return math.exp(-1.0 / t) * (1.0 / t ** 4 - 2.0 / t ** 3)


def _phi_s(x: float) -> float:
    u = _psi_s(2 * x - 1)
    v = _psi_s(2 - 2 * x)
    return u / (u + v)


def _dphi_s(x: float) -> float:
    u, v = 2 * x - 1, 2 - 2 * x
    pu, pv = _psi_s(u), _psi_s(v)
    s = pu + pv
    return 2.0 * (_dpsi_s(u) * pv + pu * _dpsi_s(v)) / (s * s)


def _d2phi_s(x: float) -> float:
    u, v = 2 * x - 1, 2 - 2 * x
    pu, pv = _psi_s(u), _psi_s(v)
    du, dv = _dpsi_s(u), _dpsi_s(v)
    s = pu + pv
    n = du * pv + pu * dv
    dn = 2 * (_d2psi_s(u) * pv - pu * _d2psi_s(v))
    ds = 2 * (du - dv)
    return 2.0 * (dn * s - 2 * n * ds) / (s * s * s)


_SCALAR_CUTOFF = {"phi": _phi_s, "dphi": _dphi_s, "d2phi": _d2phi_s}


def _eval(e: Expr, env):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            v = env[e.name]
        except KeyError:
            raise KeyError(f"unbound variable {e.name!r}") from None
        return np.asarray(v, dtype=complex) if np.ndim(v) else complex(v)
    if isinstance(e, Add):
        out = _eval(e.args[0], env)
        for a in e.args[1:]:
            out = out + _eval(a, env)
        return out
    if isinstance(e, Mul):
        out = _eval(e.args[0], env)
        for a in e.args[1:]:
            out = out * _eval(a, env)
        return out
    if isinstance(e, Pow):
        b = _eval(e.base, env)
        p = _eval(e.expo, env)
        return np.power(np.asarray(b, dtype=complex) if np.ndim(b) else complex(b), p)
    if isinstance(e, Func):
        a = _eval(e.arg, env)
        if e.name in ("phi", "dphi", "d2phi"):
            return _FUNC_NUM[e.name](a) + 0j
        if e.name == "log":
            a = np.asarray(a, dtype=complex) if np.ndim(a) else complex(a)
        return _FUNC_NUM[e.name](a)
    raise TypeError(f"unknown node {e!r}")


# --------------------------------------------------------------------------
# differentiation / substitution
# --------------------------------------------------------------------------

def diff(e: Expr, name: str) -> Expr:
    if isinstance(e, Const):
        return zero
    if isinstance(e, Var):
        return one if e.name == name else zero
    if isinstance(e, Add):
        return add(*(diff(a, name) for a in e.args))
    if isinstance(e, Mul):
        parts = []
        for i, a in enumerate(e.args):
            da = diff(a, name)
            if _is_const(da, 0):
                continue
            parts.append(mul(*(e.args[:i]), da, *(e.args[i + 1:])))
        return add(*parts) if parts else zero
    if isinstance(e, Pow):
        b, p = e.base, e.expo
        if isinstance(p, Const):
            return mul(p, pow_(b, Const(p.value - 1)), diff(b, name))
        # general power: b^p * (p' log b + p b'/b)
        return mul(e, add(mul(diff(p, name), log(b)), mul(p, div(diff(b, name), b))))
    if isinstance(e, Func):
        da = diff(e.arg, name)
        if _is_const(da, 0):
            return zero
        outer = {
            "exp": lambda a: exp(a),
            "log": lambda a: div(one, a),
            "sin": lambda a: cos(a),
            "cos": lambda a: neg(sin(a)),
            "sqrt": lambda a: mul(Const(0.5), pow_(a, Const(-0.5))),
            "phi": lambda a: Func("dphi", a),
            "dphi": lambda a: Func("d2phi", a),
        }
        if e.name not in outer:
            raise NonDifferentiableError(f"no symbolic derivative for {e.name}")
        return mul(outer[e.name](e.arg), da)
    raise TypeError(f"unknown node {e!r}")


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    if isinstance(e, Const):
        return e
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Add):
        return add(*(substitute(a, mapping) for a in e.args))
    if isinstance(e, Mul):
        return mul(*(substitute(a, mapping) for a in e.args))
    if isinstance(e, Pow):
        return pow_(substitute(e.base, mapping), substitute(e.expo, mapping))
    if isinstance(e, Func):
        return Func(e.name, substitute(e.arg, mapping))
    raise TypeError(f"unknown node {e!r}")


def free_vars(e: Expr) -> set:
    if isinstance(e, Const):
        return set()
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, (Add, Mul)):
        out = set()
        for a in e.args:
            out |= free_vars(a)
        return out
    if isinstance(e, Pow):
        return free_vars(e.base) | free_vars(e.expo)
    if isinstance(e, Func):
        return free_vars(e.arg)
    raise TypeError(f"unknown node {e!r}")


# --------------------------------------------------------------------------
# polynomial recognition and symbolic antiderivatives
# --------------------------------------------------------------------------

def as_polynomial(e: Expr, name: str, max_degree: int = 64):
    """Return {degree: coeff} if ``e`` is a polynomial in ``name``, else None.

    Other variables must be absent.  Powers must be nonnegative integers.
    """
    if isinstance(e, Const):
        return {0: e.value}
    if isinstance(e, Var):
        if e.name == name:
            return {1: 1 + 0j}
        return None
    if isinstance(e, Add):
        out: dict[int, complex] = {}
        for a in e.args:
            p = as_polynomial(a, name, max_degree)
            if p is None:
                return None
            for k, c in p.items():
                out[k] = out.get(k, 0j) + c
        return {k: c for k, c in out.items() if c != 0} or {0: 0j}
    if isinstance(e, Mul):
        out = {0: 1 + 0j}
        for a in e.args:
            p = as_polynomial(a, name, max_degree)
            if p is None:
                return None
            nxt: dict[int, complex] = {}
            for k1, c1 in out.items():
                for k2, c2 in p.items():
                    if k1 + k2 > max_degree:
                        return None
                    nxt[k1 + k2] = nxt.get(k1 + k2, 0j) + c1 * c2
            out = nxt
        return {k: c for k, c in out.items() if c != 0} or {0: 0j}
    if isinstance(e, Pow):
        if not isinstance(e.expo, Const):
            return None
        p = e.expo.value
        if p.imag != 0 or p.real < 0 or p.real != int(p.real):
            return None
        base = as_polynomial(e.base, name, max_degree)
        if base is None:
            return None
        out = {0: 1 + 0j}
        for _ in range(int(p.real)):
            nxt = {}
            for k1, c1 in out.items():
                for k2, c2 in base.items():
                    if k1 + k2 > max_degree:
                        return None
                    nxt[k1 + k2] = nxt.get(k1 + k2, 0j) + c1 * c2
            out = nxt
        return {k: c for k, c in out.items() if c != 0} or {0: 0j}
    if isinstance(e, Func):
        return None
    raise TypeError(f"unknown node {e!r}")


def _linear_coeffs(e: Expr, name: str):
    """Return (a, b) with e == a*x + b when e is affine in ``name``, else None."""
    p = as_polynomial(e, name, max_degree=1)
    if p is None or any(k > 1 for k in p):
        return None
    return p.get(1, 0j), p.get(0, 0j)


def antiderivative(e: Expr, name: str) -> Expr:
    """Symbolic antiderivative where the grammar permits one.

    Supported: polynomials, real/complex powers (p != -1), x^-1 -> log,
    exp/sin/cos of affine arguments, sums and constant multiples.
    Raises ``UnrepresentableCoreError`` otherwise; callers fall back to a
    numerically tabulated core.
    """
    x = Var(name)
    if isinstance(e, Const):
        return mul(e, x)
    if isinstance(e, Var):
        if e.name != name:
            return mul(e, x)
        return mul(Const(0.5), pow_(x, Const(2)))
    if isinstance(e, Add):
        return add(*(antiderivative(a, name) for a in e.args))
    if isinstance(e, Mul):
        cpart = []
        rest = []
        for a in e.args:
            if name in free_vars(a):
                rest.append(a)
            else:
                cpart.append(a)
        if not rest:
            return mul(*e.args, x)
        if len(rest) == 1:
            return mul(*cpart, antiderivative(rest[0], name))
        raise UnrepresentableCoreError("product of nonconstant factors")
    if isinstance(e, Pow):
        if isinstance(e.base, Var) and e.base.name == name and isinstance(e.expo, Const):
            p = e.expo.value
            if p == -1:
                return log(x)
            return mul(Const(1.0 / (p + 1)), pow_(x, Const(p + 1)))
        if isinstance(e.expo, Const):
            lin = _linear_coeffs(e.base, name)
            if lin is not None and lin[0] != 0:
                a = lin[0]
                p = e.expo.value
                if p == -1:
                    return mul(Const(1.0 / a), log(e.base))
                return mul(Const(1.0 / (a * (p + 1))), pow_(e.base, Const(p + 1)))
        raise UnrepresentableCoreError("general power")
    if isinstance(e, Func):
        lin = _linear_coeffs(e.arg, name)
        if lin is None or lin[0] == 0:
            raise UnrepresentableCoreError(f"{e.name} of nonlinear argument")
        a = lin[0]
        if e.name == "exp":
            return mul(Const(1.0 / a), exp(e.arg))
        if e.name == "sin":
            return mul(Const(-1.0 / a), cos(e.arg))
        if e.name == "cos":
            return mul(Const(1.0 / a), sin(e.arg))
        raise UnrepresentableCoreError(f"no closed antiderivative for {e.name}")
    raise TypeError(f"unknown node {e!r}")


# --------------------------------------------------------------------------
# parsing / printing
# --------------------------------------------------------------------------

_FUNC_NAMES = ("exp", "log", "sin", "cos", "sqrt", "phi")
_VAR_NAMES = ("x", "t1", "t2")


class _Tok:
    __slots__ = ("kind", "text")

    def __init__(self, kind, text):
        self.kind, self.text = kind, text

    def __repr__(self):
        return f"{self.kind}:{self.text}"


def _tokenize(s: str):
    toks = []
    i, n = 0, len(s)
    while i < n:
        c = s[i]
        if c.isspace():
            i += 1
            continue
        if c in "+-/()":
            toks.append(_Tok(c, c))
            i += 1
            continue
        if c == "*":
            if i + 1 < n and s[i + 1] == "*":
                toks.append(_Tok("^", "**"))
                i += 2
            else:
                toks.append(_Tok("*", "*"))
                i += 1
            continue
        if c == "^":
            toks.append(_Tok("^", "^"))
            i += 1
            continue
        if c.isdigit() or c == ".":
            j = i
            while j < n and (s[j].isdigit() or s[j] == "."):
                j += 1
            # exponent part
            if j < n and s[j] in "eE" and j + 1 < n and (s[j + 1].isdigit() or s[j + 1] in "+-"):
                k = j + 2 if s[j + 1] in "+-" else j + 1
                while k < n and s[k].isdigit():
                    k += 1
                j = k
            toks.append(_Tok("num", s[i:j]))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (s[j].isalnum() or s[j] == "_"):
                j += 1
            toks.append(_Tok("name", s[i:j]))
            i = j
            continue
        raise ValueError(f"unexpected character {c!r} in expression")
    toks.append(_Tok("end", ""))
    return toks


class _Parser:
    def __init__(self, toks):
        self.toks = toks
        self.pos = 0

    def peek(self):
        return self.toks[self.pos]

    def next(self):
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, kind):
        t = self.next()
        if t.kind != kind:
            raise ValueError(f"expected {kind!r}, got {t.text!r}")
        return t

    def parse_expr(self):
        e = self.parse_term()
        while self.peek().kind in ("+", "-"):
            op = self.next().kind
            rhs = self.parse_term()
            e = add(e, rhs) if op == "+" else sub(e, rhs)
        return e

    def parse_term(self):
        e = self.parse_factor()
        while self.peek().kind in ("*", "/"):
            op = self.next().kind
            rhs = self.parse_factor()
            e = mul(e, rhs) if op == "*" else div(e, rhs)
        return e

    def parse_factor(self):
        e = self.parse_unary()
        if self.peek().kind == "^":
            self.next()
            rhs = self.parse_factor()
            e = pow_(e, rhs)
        return e

    def parse_unary(self):
        if self.peek().kind in ("+", "-"):
            op = self.next().kind
            e = self.parse_unary()
            return e if op == "+" else neg(e)
        return self.parse_atom()

    def parse_atom(self):
        t = self.next()
        if t.kind == "num":
            return Const(complex(float(t.text)))
        if t.kind == "(":
            e = self.parse_expr()
            self.expect(")")
            return e
        if t.kind == "name":
            if t.text == "i":
                return imag_unit
            if t.text in _FUNC_NAMES:
                self.expect("(")
                arg = self.parse_expr()
                self.expect(")")
                return _func(t.text)(arg) if t.text not in ("sqrt",) else sqrt(arg)
            if t.text in _VAR_NAMES:
                return Var(t.text)
            raise ValueError(f"unknown identifier {t.text!r}")
        raise ValueError(f"unexpected token {t.text!r}")


def parse(text: str) -> Expr:
    """Parse an expression string over the documented grammar."""
    p = _Parser(_tokenize(text))
    e = p.parse_expr()
    p.expect("end")
    return e


def _fmt_complex(v: complex) -> str:
    if v.imag == 0:
        r = v.real
        if r == int(r) and abs(r) < 1e15:
            return str(int(r))
        return repr(r)
    if v.real == 0:
        return f"{_fmt_complex(complex(v.imag))}*i" if v.imag != 1 else "i"
    return f"({_fmt_complex(complex(v.real))}+{_fmt_complex(complex(v.imag))}*i)"


def to_text(e: Expr) -> str:
    """Render an expression back into the textual grammar."""
    if isinstance(e, Const):
        return _fmt_complex(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Add):
        return "(" + " + ".join(to_text(a) for a in e.args) + ")"
    if isinstance(e, Mul):
        return "(" + " * ".join(to_text(a) for a in e.args) + ")"
    if isinstance(e, Pow):
        return f"({to_text(e.base)})^({to_text(e.expo)})"
    if isinstance(e, Func):
        return f"{e.name}({to_text(e.arg)})"
    raise TypeError(f"unknown node {e!r}")
