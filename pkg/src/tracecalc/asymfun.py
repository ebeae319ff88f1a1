r"""Finite-part integrals on the half-line for log-power expansions.

A function f on [0, oo) is admissible when, beyond a radius R >= 1, it
splits as

    f(x) = h(x) + sum_j  c_j x^{p_j} (log x)^{e_j},        e_j in {0, 1},

with the remainder h decaying like x^rho for a declared rho < -1.  The
regularized integral subtracts from the naive integral the divergent
antiderivative values at R:

    FP(f) = int_0^R f + int_R^oo h - sum_j T_j(R),

where T_j is the elementary antiderivative of the j-th expansion term
(x^p -> x^{p+1}/(p+1) for p != -1, x^{-1} -> log x, and
x^p log x -> x^{p+1} (log x / (p+1) - 1/(p+1)^2)).  The value does not
depend on R or on how deep the expansion is declared, vanishes on
polynomials, and agrees with the absolutely convergent integral when one
exists.  ``itr`` implements FP; ``itr_line`` glues the two half-lines.

The module also provides the antiderivative operator I(f)(x) =
int_0^x f (closed under the admissible class, with the new constant term
equal to FP(f)), tail fitting out of samples, and simple-pole extraction
from circle samples of a meromorphic function.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.integrate import quad

from . import expr as ex
from .errors import (
    DomainError,
    HigherOrderPoleError,
    IllConditionedFitError,
    InsufficientDecayError,
    QuadratureFailureError,
    ResidualTooLargeError,
    SingularExpressionError,
    UnrepresentableCoreError,
)

__all__ = [
    "LogPowerTerm", "TailExpansion", "AsymFn", "MeromorphicScalar",
    "make_tail", "schwartz_tail",
    "evaluate", "antiderivative", "derivative", "itr", "itr_line",
    "fit_tail", "pole_extract", "sample_on_circle", "pole_location",
    "cquad", "tail_consistency",
]

#: default accuracy targets for the regularized integrals
REL_TOL = 1e-10
_QUAD_EPSABS = 1e-13
_QUAD_EPSREL = 1e-12
_SCHWARTZ_ORDER = -50.0


# --------------------------------------------------------------------------
# data types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LogPowerTerm:
    """One expansion term  coeff * x^power * (log x)^log_exp."""

    coeff: complex
    power: complex
    log_exp: int = 0

    def __post_init__(self):
        if self.log_exp not in (0, 1):
            raise ValueError("log exponent capped at 1; log^2 inputs are rejected")
        object.__setattr__(self, "coeff", complex(self.coeff))
        object.__setattr__(self, "power", complex(self.power))


@dataclass(frozen=True)
class TailExpansion:
    """Declared asymptotic data of an admissible function beyond ``start_radius``."""

    base_order: complex
    terms: tuple[LogPowerTerm, ...]
    start_radius: float = 1.0
    remainder_order: float = _SCHWARTZ_ORDER
    fit_residual: float | None = None

    def __post_init__(self):
        if self.start_radius < 1.0:
            raise ValueError("start_radius must be >= 1")
        object.__setattr__(self, "terms", _normalize_terms(self.terms))

    def evaluate(self, x):
        """Sum of the declared terms at x (x >= start_radius expected)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        lx = None
        for t in self.terms:
            piece = t.coeff * np.power(x.astype(complex), t.power)
            if t.log_exp:
                if lx is None:
                    lx = np.log(x)
                piece = piece * lx
            out = out + piece
        return out if out.ndim else complex(out)


def _normalize_terms(terms) -> tuple[LogPowerTerm, ...]:
    merged: dict[tuple, list] = {}
    for t in terms:
        if not isinstance(t, LogPowerTerm):
            t = LogPowerTerm(*t)
        # rounded key only for merging; the stored power keeps full precision
        key = (round(t.power.real, 12), round(t.power.imag, 12), t.log_exp)
        if key in merged:
            merged[key][0] += t.coeff
        else:
            merged[key] = [t.coeff, t.power, t.log_exp]
    out = [LogPowerTerm(c, p, le) for c, p, le in merged.values() if c != 0]
    out.sort(key=lambda t: (-t.power.real, -t.log_exp, t.power.imag))
    return tuple(out)


def make_tail(terms, start_radius=1.0, remainder_order=_SCHWARTZ_ORDER,
              base_order=None) -> TailExpansion:
    """Build a TailExpansion; base_order defaults to the leading power."""
    terms = _normalize_terms(terms)
    if base_order is None:
        base_order = terms[0].power if terms else 0j
    return TailExpansion(complex(base_order), terms, float(start_radius),
                         float(remainder_order))


def schwartz_tail(start_radius=1.0) -> TailExpansion:
    """Empty expansion of a rapidly decaying function."""
    return TailExpansion(0j, (), start_radius, _SCHWARTZ_ORDER)


@dataclass(frozen=True)
class AsymFn:
    """Half-line function: evaluable core plus declared tail expansion.

    ``core`` is either an expression tree in the variable ``x`` or a
    vectorized callable.  The semantic contract is
    core(x) = tail.evaluate(x) + O(x^remainder_order) for
    x >= tail.start_radius.
    """

    core: object  # ex.Expr | Callable
    tail: TailExpansion
    name: str = ""
    tabulated: bool = False

    @property
    def symbolic(self) -> bool:
        return isinstance(self.core, ex.Expr)

    def __call__(self, x):
        return evaluate(self, x)


@dataclass(frozen=True)
class MeromorphicScalar:
    """Simple-pole Laurent data extracted from circle samples."""

    samples: tuple[tuple[complex, complex], ...]
    center: complex
    residue: complex
    finite_part: complex
    fit_residual: float


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------

def _core_values(core, x):
    if isinstance(core, ex.Expr):
        return ex.evaluate(core, x=x)
    return core(x)


def evaluate(f: AsymFn, x) -> complex:
    """Exact evaluation of the core at x >= 0."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise DomainError("asymptotic functions live on x >= 0")
    vals = _core_values(f.core, x)
    if not np.all(np.isfinite(np.asarray(vals))):
        raise SingularExpressionError("core is singular at a requested point")
    return vals


def _remainder_values(f: AsymFn, x):
    return np.asarray(_core_values(f.core, x)) - np.asarray(f.tail.evaluate(x))


# --------------------------------------------------------------------------
# quadrature engine
# --------------------------------------------------------------------------

def cquad(fun: Callable, a: float, b: float, points=None):
    """Adaptive complex quadrature on a finite interval; returns (value, err)."""
    kw = dict(epsabs=_QUAD_EPSABS, epsrel=_QUAD_EPSREL, limit=300, full_output=1)
    if points:
        pts = sorted(p for p in points if a < p < b)
        if pts:
            kw["points"] = pts
    re_out = quad(lambda t: fun(t).real, a, b, **kw)
    im_out = quad(lambda t: fun(t).imag, a, b, **kw)
    return complex(re_out[0], im_out[0]), re_out[1] + im_out[1]


_CUTOFF_POINTS = (0.5, 1.0)


def _scalar_core(f: AsymFn):
    core = f.core
    if isinstance(core, ex.Expr):
        return lambda t: complex(ex.evaluate(core, x=t, check=False))
    return lambda t: complex(core(t))


def _tail_integral(f: AsymFn, R: float):
    """int_R^oo (core - declared terms), with analytic truncation bound."""
    rho = f.tail.remainder_order
    if rho >= -1.0:
        raise InsufficientDecayError(
            f"remainder order {rho} >= -1: tail remainder not integrable")
    core = _scalar_core(f)
    tail = f.tail

    def h(t):
        return core(t) - tail.evaluate(t)

    total = 0j
    err = 0.0
    lo = R
    c_est = 0.0
    for k in range(64):
        # declared-decay stop: once |h| <= C t^rho (C estimated at the early
        # edges, before floating cancellation in core - terms dominates) says
        # the remaining mass is below target, integrating further would only
        # accumulate cancellation noise
        scale = max(1e-3, abs(total))
        thresh = 0.25 * REL_TOL * scale
        if k >= 2:
            bound_decl = c_est * lo ** (rho + 1.0) / (-rho - 1.0)
            if bound_decl < thresh:
                return total, err + bound_decl
        hi = lo * 2.0
        piece, perr = cquad(h, lo, hi)
        total += piece
        err += perr
        edge = abs(h(hi))
        if k < 3:
            c_est = max(c_est, edge * hi ** (-rho))
        bound_edge = edge * hi / (-rho - 1.0)
        scale = max(1e-3, abs(total))
        thresh = 0.25 * REL_TOL * scale
        if bound_edge < thresh and abs(piece) < thresh:
            return total, err + bound_edge
        lo = hi
    raise QuadratureFailureError("tail integral did not converge in 64 doublings")


def _term_antiderivative_at(t: LogPowerTerm, x: float) -> complex:
    """Elementary antiderivative of a tail term, evaluated at x."""
    p, c = t.power, t.coeff
    lx = math.log(x)
    if t.log_exp == 0:
        if p == -1:
            return c * lx
        return c * cmath.exp((p + 1) * lx) / (p + 1)
    if p == -1:
        raise InsufficientDecayError(
            "term x^{-1} log x integrates to log^2, outside the admissible class")
    q = p + 1
    return c * cmath.exp(q * lx) * (lx / q - 1.0 / q / q)


def _poly_coeffs(f: AsymFn):
    if not isinstance(f.core, ex.Expr):
        return None
    return ex.as_polynomial(f.core, "x")


def _tail_matches_poly(tail: TailExpansion, coeffs: Mapping[int, complex]) -> bool:
    declared = {}
    for t in tail.terms:
        if t.log_exp != 0:
            return False
        p = t.power
        if p.imag != 0 or p.real != round(p.real) or p.real < 0:
            return False
        declared[int(p.real)] = t.coeff
    want = {k: c for k, c in coeffs.items() if c != 0}
    return declared == want


# --------------------------------------------------------------------------
# the regularized integral
# --------------------------------------------------------------------------

def itr(f: AsymFn, radius: float | None = None) -> complex:
    """Finite-part integral of ``f`` over [0, oo).

    Independent of the evaluation radius (any radius >= start_radius may
    be passed to exercise that invariance).  Polynomials are annihilated
    exactly through a closed-form path.
    """
    R = float(radius) if radius is not None else f.tail.start_radius
    if R < f.tail.start_radius:
        raise DomainError("evaluation radius below the declared start radius")

    coeffs = _poly_coeffs(f)
    if coeffs is not None and _tail_matches_poly(f.tail, coeffs):
        return 0j

    if f.tail.remainder_order >= -1.0:
        raise InsufficientDecayError(
            f"remainder order {f.tail.remainder_order} >= -1")

    core = _scalar_core(f)
    head, head_err = cquad(core, 0.0, R, points=_CUTOFF_POINTS)
    rest, rest_err = _tail_integral(f, R)
    subtraction = 0j
    for t in f.tail.terms:
        subtraction += _term_antiderivative_at(t, R)
    value = head + rest - subtraction
    # QUADPACK error estimates are conservative for composite integrands;
    # fail only when the estimate is far off the 1e-10 relative target
    tol = max(abs(value), 1.0) * REL_TOL
    if head_err + rest_err > 1e3 * tol:
        raise QuadratureFailureError(
            f"quadrature error {head_err + rest_err:.2e} exceeds target {tol:.2e}")
    return value


def itr_line(f_plus: AsymFn, f_minus: AsymFn, radius: float | None = None) -> complex:
    """Finite part over the whole line, split into the two half-lines."""
    return itr(f_plus, radius) + itr(f_minus, radius)


# --------------------------------------------------------------------------
# antiderivative and derivative
# --------------------------------------------------------------------------

def _integrate_terms(terms) -> list[LogPowerTerm]:
    out: list[LogPowerTerm] = []
    for t in terms:
        p, c = t.power, t.coeff
        if t.log_exp == 0:
            if p == -1:
                out.append(LogPowerTerm(c, 0.0, 1))
            else:
                out.append(LogPowerTerm(c / (p + 1), p + 1, 0))
        else:
            if p == -1:
                raise InsufficientDecayError("x^{-1} log x would integrate to log^2")
            q = p + 1
            out.append(LogPowerTerm(c / q, q, 1))
            out.append(LogPowerTerm(-c / q / q, q, 0))
    return out


class _TabulatedAntiderivative:
    """Numerically tabulated I(f) used when the grammar has no closed form.

    Below ``switch`` the value is cumulative quadrature from 0 (with
    cached breakpoints); above it the tail representation
    I(f)(x) = FP(f) + sum_j T_j(x) - int_x^oo h is used.
    """

    def __init__(self, f: AsymFn, fp_value: complex):
        self._f = f
        self._fp = fp_value
        self.switch = max(2.0, 2.0 * f.tail.start_radius)
        self._knots: list[float] = [0.0]
        self._vals: list[complex] = [0j]
        self._core = _scalar_core(f)

    def _cumulative(self, x: float) -> complex:
        i = 0
        for k, kn in enumerate(self._knots):
            if kn <= x:
                i = k
        base_x, base_v = self._knots[i], self._vals[i]
        if x == base_x:
            return base_v
        inc, _ = cquad(self._core, base_x, x, points=_CUTOFF_POINTS)
        val = base_v + inc
        if x > self._knots[-1]:
            self._knots.append(x)
            self._vals.append(val)
        return val

    def _via_tail(self, x: float) -> complex:
        f = self._f
        total = self._fp
        for t in f.tail.terms:
            total += _term_antiderivative_at(t, x)
        rest = _tail_rest(f, x)
        return total - rest

    def __call__(self, x):
        if np.ndim(x):
            return np.array([self(float(t)) for t in np.asarray(x).ravel()]).reshape(np.shape(x))
        x = float(x)
        if x <= self.switch:
            return self._cumulative(x)
        return self._via_tail(x)


def _tail_rest(f: AsymFn, x: float) -> complex:
    """int_x^oo (core - terms) for x >= start_radius."""
    shifted = replace(f.tail, start_radius=max(f.tail.start_radius, 1.0))
    g = AsymFn(f.core, shifted)
    val, _ = _tail_integral(g, x)
    return val


def antiderivative(f: AsymFn) -> AsymFn:
    """I(f)(x) = int_0^x f, with I(f)(0) = 0.

    Tail terms integrate symbolically; the new constant term equals the
    finite part of f; the remainder order rises by one.  When the core
    grammar admits no symbolic antiderivative, a numerically tabulated
    core is substituted and the result is flagged ``tabulated``.
    """
    fp_value = itr(f)
    new_terms = _integrate_terms(f.tail.terms)
    new_terms.append(LogPowerTerm(fp_value, 0.0, 0))
    new_tail = TailExpansion(
        f.tail.base_order + 1,
        tuple(new_terms),
        f.tail.start_radius,
        f.tail.remainder_order + 1.0,
    )
    if isinstance(f.core, ex.Expr):
        try:
            F = ex.antiderivative(f.core, "x")
            core = ex.sub(F, ex.const(ex.evaluate(F, x=0.0)))
            return AsymFn(core, new_tail, name=f"I({f.name})" if f.name else "")
        except UnrepresentableCoreError:
            pass
    core = _TabulatedAntiderivative(f, fp_value)
    return AsymFn(core, new_tail, name=f"I({f.name})" if f.name else "",
                  tabulated=True)


def derivative(f: AsymFn) -> AsymFn:
    """Exact symbolic derivative (expression cores only)."""
    if not isinstance(f.core, ex.Expr):
        raise UnrepresentableCoreError("derivative requires an expression core")
    new_terms: list[LogPowerTerm] = []
    for t in f.tail.terms:
        p, c = t.power, t.coeff
        if t.log_exp == 0:
            if p != 0:
                new_terms.append(LogPowerTerm(c * p, p - 1, 0))
        else:
            if p != 0:
                new_terms.append(LogPowerTerm(c * p, p - 1, 1))
            new_terms.append(LogPowerTerm(c, p - 1, 0))
    new_tail = TailExpansion(
        f.tail.base_order - 1,
        tuple(new_terms),
        f.tail.start_radius,
        f.tail.remainder_order - 1.0,
    )
    return AsymFn(ex.diff(f.core, "x"), new_tail,
                  name=f"D({f.name})" if f.name else "")


# --------------------------------------------------------------------------
# tail fitting and pole extraction
# --------------------------------------------------------------------------

def fit_tail(samples: Sequence[tuple[float, complex]],
             basis: Sequence[tuple[complex, int]],
             start_radius: float | None = None,
             rel_tol: float = 1e-6) -> TailExpansion:
    """Least-squares extraction of expansion coefficients from samples.

    ``samples`` holds (radius, value) pairs at geometrically spaced radii;
    ``basis`` holds (power, log_exp) pairs.  Requires at least twice as
    many samples as basis functions.  Rejects an ill-conditioned design
    matrix (cond > 1e12) and relative residuals above ``rel_tol``.
    """
    if len(samples) < 2 * len(basis):
        raise DomainError("need at least 2x as many samples as basis terms")
    radii = np.array([float(r) for r, _ in samples])
    vals = np.array([complex(v) for _, v in samples])
    cols = []
    for p, e in basis:
        col = np.power(radii.astype(complex), complex(p))
        if e:
            col = col * np.log(radii)
        cols.append(col)
    A = np.stack(cols, axis=1)
    cond = np.linalg.cond(A)
    if cond > 1e12:
        raise IllConditionedFitError(f"design matrix condition number {cond:.3e}")
    coeffs, *_ = np.linalg.lstsq(A, vals, rcond=None)
    resid = np.linalg.norm(A @ coeffs - vals)
    scale = max(np.linalg.norm(vals), 1e-30)
    rel = float(resid / scale)
    if rel > rel_tol:
        raise ResidualTooLargeError(f"fit residual {rel:.3e} exceeds {rel_tol:.1e}")
    terms = tuple(
        LogPowerTerm(c, p, e) for c, (p, e) in zip(coeffs, basis)
    )
    tail = make_tail(terms,
                     start_radius=start_radius if start_radius is not None
                     else float(radii.min()),
                     remainder_order=min((complex(p).real for p, _ in basis),
                                         default=0.0) - 1.0)
    return replace(tail, fit_residual=rel)


def sample_on_circle(fun: Callable[[complex], complex], center: complex,
                     radius: float = 0.3, n: int = 32):
    """Equispaced samples of ``fun`` on a circle around ``center``."""
    zs = center + radius * np.exp(2j * np.pi * np.arange(n) / n)
    return tuple((complex(z), complex(fun(complex(z)))) for z in zs)


def pole_extract(samples, center: complex = 0j,
                 pole_tol: float = 1e-5) -> MeromorphicScalar:
    """Laurent data at a (at most simple) pole from circle samples.

    The residue is the discrete Cauchy integral (1/2 pi i) \oint F; the
    finite part is the mean of F - residue/(z - center).  A significant
    second subdiagonal Laurent coefficient signals a violated
    simple-pole contract and raises ``HigherOrderPoleError``.
    """
    if isinstance(samples, Mapping):
        samples = tuple(samples.items())
    samples = tuple((complex(z), complex(v)) for z, v in samples)
    if len(samples) < 16:
        raise DomainError("need at least 16 circle samples")
    zs = np.array([z for z, _ in samples])
    vs = np.array([v for _, v in samples])
    w = zs - center
    radius = float(np.mean(np.abs(w)))
    residue = complex(np.mean(vs * w))
    a_m2 = complex(np.mean(vs * w * w))
    fmax = float(np.max(np.abs(vs)))
    if abs(a_m2) > pole_tol * radius * max(1.0, abs(residue), radius * fmax):
        raise HigherOrderPoleError(
            f"second Laurent coefficient {abs(a_m2):.3e}: not a simple pole")
    analytic = vs - residue / w
    finite_part = complex(np.mean(analytic))
    fit_residual = float(np.max(np.abs(analytic - finite_part)))
    return MeromorphicScalar(samples, complex(center), residue, finite_part,
                             fit_residual)


def pole_location(samples, center: complex = 0j) -> complex:
    """Estimated location of a nearby simple pole from circle samples.

    For F = res/(z - c*), the ratio of the first two Cauchy moments about
    the assumed center recovers c* exactly.
    """
    if isinstance(samples, Mapping):
        samples = tuple(samples.items())
    zs = np.array([complex(z) for z, _ in samples])
    vs = np.array([complex(v) for _, v in samples])
    w = zs - center
    a1 = complex(np.mean(vs * w))
    a2 = complex(np.mean(vs * w * w))
    if abs(a1) < 1e-14:
        raise HigherOrderPoleError("no pole signal near the sampling circle")
    return complex(center + a2 / a1)


# --------------------------------------------------------------------------
# consistency diagnostics
# --------------------------------------------------------------------------

def tail_consistency(f: AsymFn, span: float = 1e4, n: int = 40) -> float:
    """Max of |core - terms| / x^remainder_order over a geometric grid.

    Normalized so that the declared contract holds iff the returned
    constant is finite and stable; callers compare against the value at
    the first grid point.
    """
    R = f.tail.start_radius
    xs = np.geomspace(R, span * R, n)
    rem = np.abs(_remainder_values(f, xs))
    bound = np.power(xs, f.tail.remainder_order)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = rem / bound
    ratio = ratio[np.isfinite(ratio)]
    return float(ratio.max()) if ratio.size else 0.0
