r"""Matrix-valued classical symbol families over R^q (q = 1 or 2).

A suspended element is a matrix family tau -> A(tau) whose entries are
closed-form expressions in the parameters (t1, t2), together with a
declared order m and optional homogeneous tail data: components h_j on
the unit sphere, j = m, m-1, ..., so that along every ray

    A(r theta) = sum_j h_j(theta) r^j + O(r^{m - depth}).

Composition of families is the pointwise matrix product (the exact
picture at zero-dimensional coefficient fibers); tail data composes by
the Cauchy product of homogeneous parts.  Angular data is stored on a
fixed quadrature grid (two points for q = 1, an equispaced circle for
q = 2), where products are pointwise and angular derivatives are
spectral (exact for band-limited data).

Fixture files use a versioned JSON schema (``save_element`` /
``load_element``): entries as expression strings, orders as [re, im]
pairs, homogeneous components per integer offset as constant, Fourier,
or two-ray matrices.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import expr as ex
from .asymfun import AsymFn, LogPowerTerm, TailExpansion, fit_tail, make_tail
from .errors import (
    BandwidthError,
    DimensionMismatchError,
    DomainError,
    NonPositiveWeightError,
    SingularMatrixError,
)

__all__ = [
    "AngularGrid", "angular_grid", "HomogData", "SuspendedElement",
    "ReferenceWeight", "compose", "add_elements", "scale_element",
    "partial_deriv", "complex_power", "apply_gauge", "trace_asymfn",
    "ray_trace_asymfn", "binomial_series_terms", "is_smoothing_sampled",
    "extract_homog", "TruncatedCircleBackend", "quantize_circle",
    "identity_element", "constant_element", "poly_element",
    "radial_power_element", "gaussian_element", "cutoff_laurent_element",
    "save_element", "load_element", "SCHEMA_VERSION",
]

SCHEMA_VERSION = 1

#: angular resolution of stored sphere data per parameter dimension
ANGULAR_POINTS = {1: 2, 2: 256}

#: depth cap for generated / composed homogeneous data
DEPTH_CAP = 24

_VARS = ("t1", "t2")
_SCHWARTZ = -50.0


# --------------------------------------------------------------------------
# angular grids
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AngularGrid:
    """Unit-sphere quadrature: directions, weights (summing to vol S^{q-1})."""

    q: int
    dirs: np.ndarray      # (G, q)
    weights: np.ndarray   # (G,)

    @property
    def size(self) -> int:
        return self.dirs.shape[0]

    @property
    def volume(self) -> float:
        return float(self.weights.sum())

    def average(self, values: np.ndarray) -> np.ndarray:
        """Weighted average over the sphere; values indexed (..., G)."""
        return np.tensordot(values, self.weights, axes=([-1], [0])) / self.volume


_GRIDS: dict[int, AngularGrid] = {}


def angular_grid(q: int) -> AngularGrid:
    if q not in (1, 2):
        raise DomainError("parameter dimension restricted to q in {1, 2}")
    if q not in _GRIDS:
        if q == 1:
            dirs = np.array([[1.0], [-1.0]])
            w = np.array([1.0, 1.0])           # vol(S^0) = 2
        else:
            G = ANGULAR_POINTS[2]
            th = 2 * np.pi * np.arange(G) / G
            dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
            w = np.full(G, 2 * np.pi / G)      # vol(S^1) = 2 pi
        _GRIDS[q] = AngularGrid(q, dirs, w)
    return _GRIDS[q]


def _grid_angles(grid: AngularGrid) -> np.ndarray:
    return np.arctan2(grid.dirs[:, 1], grid.dirs[:, 0])


# --------------------------------------------------------------------------
# homogeneous tail data
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class HomogData:
    """Sphere values of homogeneous components, keyed by integer offset.

    comps[k] has shape (G, n, n) and holds h_{order-k} on the grid.
    ``depth`` bounds the remainder: E(r theta) - sum = O(r^{order-depth});
    ``math.inf`` means the declared components are exact.
    """

    comps: dict[int, np.ndarray]
    depth: float

    def max_offset(self) -> int:
        return max(self.comps, default=-1)


def exact_homog(comps: Mapping[int, np.ndarray]) -> HomogData:
    return HomogData(dict(comps), math.inf)


def _homog_add(a: HomogData | None, sa: int, b: HomogData | None, sb: int) -> HomogData | None:
    """Sum with offset shifts (components of the summands sit at k + shift)."""
    if a is None or b is None:
        return None
    comps: dict[int, np.ndarray] = {}
    for k, m in a.comps.items():
        comps[k + sa] = comps.get(k + sa, 0) + m
    for k, m in b.comps.items():
        comps[k + sb] = comps.get(k + sb, 0) + m
    depth = min(a.depth + sa, b.depth + sb)
    comps = {k: v for k, v in comps.items() if k < depth and k <= DEPTH_CAP}
    return HomogData(comps, depth)


def _homog_mul(a: HomogData | None, b: HomogData | None) -> HomogData | None:
    if a is None or b is None:
        return None
    depth = min(a.depth, b.depth)
    cap = min(depth, DEPTH_CAP + 1)
    comps: dict[int, np.ndarray] = {}
    for k1, m1 in a.comps.items():
        for k2, m2 in b.comps.items():
            k = k1 + k2
            if k >= cap:
                continue
            prod = np.einsum("gij,gjk->gik", m1, m2)
            comps[k] = comps.get(k, 0) + prod
    return HomogData(comps, depth)


def _homog_scale(a: HomogData | None, c: complex) -> HomogData | None:
    if a is None:
        return None
    return HomogData({k: c * m for k, m in a.comps.items()}, a.depth)


def _fourier_modes(values: np.ndarray) -> np.ndarray:
    """FFT over the angular axis of (G, n, n) grid data."""
    return np.fft.fft(values, axis=0) / values.shape[0]


def _eval_fourier(modes: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Evaluate a Fourier series (modes over standard fftfreq layout)."""
    G = modes.shape[0]
    ks = np.fft.fftfreq(G, d=1.0 / G)
    phases = np.exp(1j * np.outer(angles, ks))          # (A, G)
    return np.tensordot(phases, modes, axes=([1], [0]))  # (A, n, n)


def _homog_partial(h: HomogData | None, order: complex, i: int,
                   grid: AngularGrid) -> HomogData | None:
    """Tail data of d/dtau_i: degree drops by one (offset fixed, order-1)."""
    if h is None:
        return None
    comps: dict[int, np.ndarray] = {}
    if grid.q == 1:
        sgn = grid.dirs[:, 0].reshape(-1, 1, 1)  # (+1, -1)
        for k, m in h.comps.items():
            j = order - k
            if j == 0:
                continue
            comps[k] = j * sgn * m
        return HomogData(comps, h.depth)
    th = _grid_angles(grid)
    cosv = np.cos(th).reshape(-1, 1, 1)
    sinv = np.sin(th).reshape(-1, 1, 1)
    for k, m in h.comps.items():
        j = order - k
        modes = _fourier_modes(m)
        ks = np.fft.fftfreq(modes.shape[0], d=1.0 / modes.shape[0])
        dth = np.fft.ifft(modes * (1j * ks)[:, None, None] * modes.shape[0], axis=0)
        if i == 0:
            val = cosv * (j * m) - sinv * dth
        else:
            val = sinv * (j * m) + cosv * dth
        if j == 0 and not np.any(dth):
            continue
        comps[k] = val
    return HomogData(comps, h.depth)


def binomial_series_terms(p: complex, shift: float, depth: int) -> dict[int, complex]:
    """(shift + r^2)^p = r^{2p} sum_i C(p, i) shift^i r^{-2i}; offsets 2i."""
    out: dict[int, complex] = {}
    coeff = 1 + 0j
    for i in range(depth + 1):
        if 2 * i > DEPTH_CAP:
            break
        out[2 * i] = coeff * shift ** i
        coeff *= (p - i) / (i + 1)
    return out


# --------------------------------------------------------------------------
# suspended elements
# --------------------------------------------------------------------------

def _entries_array(entries) -> np.ndarray:
    arr = np.empty((len(entries), len(entries[0])), dtype=object)
    for i, row in enumerate(entries):
        for j, e in enumerate(row):
            arr[i, j] = ex._coerce(e)
    return arr


@dataclass(frozen=True)
class SuspendedElement:
    """One matrix symbol family tau -> A(tau) with declared order and tails."""

    q: int
    n: int
    order: complex
    entries: np.ndarray            # (n, n) of Expr
    homog: HomogData | None = None
    smoothing: bool = False

    def __post_init__(self):
        if self.q not in (1, 2):
            raise DomainError("q must be 1 or 2")
        object.__setattr__(self, "order", complex(self.order))

    # -- evaluation ---------------------------------------------------------

    def __call__(self, taus) -> np.ndarray:
        """Evaluate at one point (q,) or a batch (..., q) of points."""
        taus = np.asarray(taus, dtype=float)
        single = taus.ndim == 1
        pts = taus.reshape(-1, self.q)
        out = np.zeros((pts.shape[0], self.n, self.n), dtype=complex)
        if pts.shape[0] <= 2:
            # scalar evaluation beats numpy dispatch on tiny batches
            for p in range(pts.shape[0]):
                env = {name: complex(pts[p, i])
                       for i, name in enumerate(_VARS[: self.q])}
                for i in range(self.n):
                    for j in range(self.n):
                        e = self.entries[i, j]
                        out[p, i, j] = (e.value if isinstance(e, ex.Const)
                                        else ex.evaluate(e, env, check=False))
        else:
            env = {name: pts[:, i] for i, name in enumerate(_VARS[: self.q])}
            for i in range(self.n):
                for j in range(self.n):
                    e = self.entries[i, j]
                    if isinstance(e, ex.Const):
                        out[:, i, j] = e.value
                    else:
                        out[:, i, j] = ex.evaluate(e, env, check=False)
        if single:
            return out[0]
        return out.reshape(taus.shape[:-1] + (self.n, self.n))

    # -- sugar --------------------------------------------------------------

    def __matmul__(self, other):
        return compose(self, other)

    def __add__(self, other):
        return add_elements(self, other)

    def __sub__(self, other):
        return add_elements(self, scale_element(-1, other))

    def __rmul__(self, c):
        return scale_element(c, self)

    def grid(self) -> AngularGrid:
        return angular_grid(self.q)


def _map_entries(fn, *arrays) -> np.ndarray:
    n, m = arrays[0].shape
    out = np.empty((n, m), dtype=object)
    for i in range(n):
        for j in range(m):
            out[i, j] = fn(*(a[i, j] for a in arrays))
    return out


def compose(A: SuspendedElement, B: SuspendedElement) -> SuspendedElement:
    """Pointwise matrix product; orders add; smoothing absorbs."""
    if A.q != B.q or A.n != B.n:
        raise DimensionMismatchError("incompatible families")
    n = A.n
    entries = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            entries[i, j] = ex.add(
                *(ex.mul(A.entries[i, k], B.entries[k, j]) for k in range(n)))
    smoothing = A.smoothing or B.smoothing
    if smoothing:
        homog = HomogData({}, math.inf)
    else:
        homog = _homog_mul(A.homog, B.homog)
    return SuspendedElement(A.q, n, A.order + B.order, entries, homog, smoothing)


def add_elements(A: SuspendedElement, B: SuspendedElement) -> SuspendedElement:
    if A.q != B.q or A.n != B.n:
        raise DimensionMismatchError("incompatible families")
    order = A.order if A.order.real >= B.order.real else B.order
    if A.smoothing and B.smoothing:
        homog, smoothing = HomogData({}, math.inf), True
    else:
        sa, sb = order - A.order, order - B.order
        if A.smoothing:
            sa, ha = 0, HomogData({}, math.inf)
            hb, sbv = B.homog, _int_shift(sb)
            homog = _homog_add(ha, 0, hb, sbv)
        elif B.smoothing:
            homog = _homog_add(A.homog, _int_shift(sa), HomogData({}, math.inf), 0)
        else:
            homog = _homog_add(A.homog, _int_shift(sa), B.homog, _int_shift(sb))
        smoothing = False
    entries = _map_entries(ex.add, A.entries, B.entries)
    return SuspendedElement(A.q, A.n, order, entries, homog, smoothing)


def _int_shift(s: complex) -> int:
    k = round(s.real)
    if abs(s - k) > 1e-9:
        raise DimensionMismatchError(
            f"orders differ by non-integer {s}: tails cannot be aligned")
    return int(k)


def scale_element(c: complex, A: SuspendedElement) -> SuspendedElement:
    entries = _map_entries(lambda e: ex.mul(ex.const(c), e), A.entries)
    return SuspendedElement(A.q, A.n, A.order, entries,
                            _homog_scale(A.homog, complex(c)), A.smoothing)


def partial_deriv(A: SuspendedElement, i: int) -> SuspendedElement:
    """d/dtau_i applied entrywise; classical order drops by one."""
    if not 0 <= i < A.q:
        raise DomainError("direction index out of range")
    name = _VARS[i]
    entries = _map_entries(lambda e: ex.diff(e, name), A.entries)
    homog = _homog_partial(A.homog, A.order, i, A.grid())
    return SuspendedElement(A.q, A.n, A.order - 1, entries, homog, A.smoothing)


def apply_gauge(T: np.ndarray, A: SuspendedElement) -> SuspendedElement:
    """Pull back along the dual action: tau -> T^t tau; order preserved."""
    T = np.asarray(T, dtype=float)
    if T.shape != (A.q, A.q):
        raise DimensionMismatchError("gauge matrix size must match q")
    if abs(np.linalg.det(T)) < 1e-12:
        raise SingularMatrixError("gauge transformation is singular")
    Tt = T.T
    subs = {}
    for i in range(A.q):
        subs[_VARS[i]] = ex.add(
            *(ex.mul(ex.const(Tt[i, j]), ex.var(_VARS[j])) for j in range(A.q)))
    entries = _map_entries(lambda e: ex.substitute(e, subs), A.entries)
    homog = _gauge_homog(A, Tt)
    return SuspendedElement(A.q, A.n, A.order, entries, homog, A.smoothing)


def _gauge_homog(A: SuspendedElement, Tt: np.ndarray) -> HomogData | None:
    if A.homog is None:
        return None
    grid = A.grid()
    mapped = grid.dirs @ Tt.T            # T^t theta per grid direction
    norms = np.linalg.norm(mapped, axis=1)
    comps: dict[int, np.ndarray] = {}
    if A.q == 1:
        sign = np.sign(mapped[:, 0])
        idx = np.array([0 if s > 0 else 1 for s in sign])
        for k, m in A.homog.comps.items():
            j = A.order - k
            scale = np.power(norms.astype(complex), j).reshape(-1, 1, 1)
            comps[k] = m[idx] * scale
        return HomogData(comps, A.homog.depth)
    new_angles = np.arctan2(mapped[:, 1], mapped[:, 0])
    for k, m in A.homog.comps.items():
        j = A.order - k
        vals = _eval_fourier(_fourier_modes(m), new_angles)
        scale = np.power(norms.astype(complex), j).reshape(-1, 1, 1)
        comps[k] = vals * scale
    return HomogData(comps, A.homog.depth)


# --------------------------------------------------------------------------
# reference weight and complex powers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ReferenceWeight:
    """Positive scalar radial weight (shift + |tau|^2)^{1/2} * Identity."""

    q: int
    n: int
    shift: float = 1.0

    def __post_init__(self):
        if self.shift < 1.0:
            raise NonPositiveWeightError(
                "weight shift below 1 violates the spectral floor")

    def element(self) -> SuspendedElement:
        return radial_power_element(self.q, self.n, 1.0, shift=self.shift)

    def power(self, z: complex) -> SuspendedElement:
        return complex_power(self, z)

    def log_entry(self) -> ex.Expr:
        """log of the scalar weight: log(shift + r^2) / 2."""
        r2 = _radius_sq(self.q)
        return ex.mul(ex.const(0.5), ex.log(ex.add(ex.const(self.shift), r2)))


def _radius_sq(q: int) -> ex.Expr:
    return ex.add(*(ex.mul(ex.var(v), ex.var(v)) for v in _VARS[:q]))


def complex_power(D: ReferenceWeight, z: complex) -> SuspendedElement:
    """D^{-z}: the pointwise spectral power, exact for the radial weight."""
    return radial_power_element(D.q, D.n, -z, shift=D.shift)


# --------------------------------------------------------------------------
# constructors
# --------------------------------------------------------------------------

def _const_comps(grid: AngularGrid, mats: Mapping[int, np.ndarray]) -> dict[int, np.ndarray]:
    G = grid.size
    return {k: np.broadcast_to(np.asarray(m, dtype=complex),
                               (G,) + np.shape(m)).copy()
            for k, m in mats.items()}


def identity_element(q: int, n: int) -> SuspendedElement:
    return constant_element(q, np.eye(n))


def constant_element(q: int, M) -> SuspendedElement:
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    entries = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            entries[i, j] = ex.const(M[i, j])
    homog = exact_homog(_const_comps(angular_grid(q), {0: M}))
    return SuspendedElement(q, n, 0j, entries, homog, False)


def poly_element(q: int, monomials: Mapping[tuple, np.ndarray]) -> SuspendedElement:
    """Polynomial family  sum_alpha M_alpha tau^alpha  with exact tails."""
    grid = angular_grid(q)
    mats = {k: np.asarray(m, dtype=complex) for k, m in monomials.items()}
    n = next(iter(mats.values())).shape[0]
    deg = max(sum(k) for k in mats)
    entries = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            parts = []
            for alpha, M in mats.items():
                if M[i, j] == 0:
                    continue
                factors = [ex.const(M[i, j])]
                for d, p in enumerate(alpha):
                    for _ in range(p):
                        factors.append(ex.var(_VARS[d]))
                parts.append(ex.mul(*factors))
            entries[i, j] = ex.add(*parts) if parts else ex.zero
    comps: dict[int, np.ndarray] = {}
    for alpha, M in mats.items():
        d = sum(alpha)
        ang = np.prod([grid.dirs[:, i] ** p for i, p in enumerate(alpha)], axis=0)
        block = ang.reshape(-1, 1, 1) * M
        k = deg - d
        comps[k] = comps.get(k, 0) + block
    return SuspendedElement(q, n, complex(deg), entries, exact_homog(comps), False)


def radial_power_element(q: int, n: int, p: complex, shift: float = 1.0,
                         matrix=None, depth: int = DEPTH_CAP // 2) -> SuspendedElement:
    """(shift + |tau|^2)^{p/2} M with the exact binomial tail."""
    M = np.eye(n, dtype=complex) if matrix is None else np.asarray(matrix, dtype=complex)
    base = ex.add(ex.const(shift), _radius_sq(q))
    radial = ex.pow_(base, ex.const(p / 2))
    entries = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            entries[i, j] = ex.mul(ex.const(M[i, j]), radial) if M[i, j] != 0 else ex.zero
    series = binomial_series_terms(p / 2, shift, depth)
    comps = _const_comps(angular_grid(q), {k: c * M for k, c in series.items()})
    homog = HomogData(comps, max(series) + 2)
    return SuspendedElement(q, n, complex(p), entries, homog, False)


def gaussian_element(q: int, M, rate: float = 1.0) -> SuspendedElement:
    """exp(-rate |tau|^2) M: a smoothing family."""
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    g = ex.exp(ex.mul(ex.const(-rate), _radius_sq(q)))
    entries = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            entries[i, j] = ex.mul(ex.const(M[i, j]), g) if M[i, j] != 0 else ex.zero
    return SuspendedElement(q, n, 0j, entries, HomogData({}, math.inf), True)


def cutoff_laurent_element(q: int, monomials: Mapping[tuple, np.ndarray],
                           drop: int) -> SuspendedElement:
    """phi(|tau|) * (sum M_alpha tau^alpha) / |tau|^{drop}: exact beyond r = 1.

    The cutoff removes the origin singularity; tails are those of the
    Laurent part (exact for r >= 1 where phi = 1).
    """
    grid = angular_grid(q)
    mats = {k: np.asarray(m, dtype=complex) for k, m in monomials.items()}
    n = next(iter(mats.values())).shape[0]
    deg = max(sum(k) for k in mats)
    order = deg - drop
    r2 = _radius_sq(q)
    cut = ex.phi(ex.pow_(r2, ex.const(0.5))) if q > 1 else ex.phi(
        ex.pow_(ex.mul(ex.var("t1"), ex.var("t1")), ex.const(0.5)))
    rpow = ex.pow_(r2, ex.const(-drop / 2))
    entries = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            parts = []
            for alpha, M in mats.items():
                if M[i, j] == 0:
                    continue
                factors = [ex.const(M[i, j])]
                for d, p in enumerate(alpha):
                    for _ in range(p):
                        factors.append(ex.var(_VARS[d]))
                parts.append(ex.mul(*factors))
            if parts:
                entries[i, j] = ex.mul(cut, rpow, ex.add(*parts))
            else:
                entries[i, j] = ex.zero
    comps: dict[int, np.ndarray] = {}
    for alpha, M in mats.items():
        d = sum(alpha)
        ang = np.prod([grid.dirs[:, i] ** p for i, p in enumerate(alpha)], axis=0)
        k = deg - d
        comps[k] = comps.get(k, 0) + ang.reshape(-1, 1, 1) * M
    return SuspendedElement(q, n, complex(order), entries, exact_homog(comps), False)


# --------------------------------------------------------------------------
# radial trace profiles
# --------------------------------------------------------------------------

def _trace_grid_values(E: SuspendedElement, r, dirs: np.ndarray) -> np.ndarray:
    """Tr E(r * dir) for r scalar or (L,), dirs (G, q); returns (L?, G)."""
    r_arr = np.asarray(r, dtype=float)
    pts = np.multiply.outer(r_arr, dirs)           # (L?, G, q)
    vals = E(pts)                                  # (L?, G, n, n)
    return np.trace(vals, axis1=-2, axis2=-1)


def _trace_is_radial(E: SuspendedElement, grid: AngularGrid) -> bool:
    """Probe whether the pointwise trace density is angular independent."""
    for r in (1.37, 3.73):
        tv = _trace_grid_values(E, r, grid.dirs)
        scale = max(float(np.max(np.abs(tv))), 1e-30)
        if float(np.max(np.abs(tv - tv.mean()))) > 1e-12 * scale:
            return False
    return True


def trace_asymfn(E: SuspendedElement, extra_power: int = 0,
                 fit_depth: int = 10) -> AsymFn:
    """Angular average of r^{extra_power} Tr E(r theta) as an AsymFn.

    The tail comes from declared homogeneous data; without it the
    coefficients are extracted by least squares along geometric radii.
    Radially symmetric trace densities are detected by probing and
    evaluated along a single ray.
    """
    grid = E.grid()
    dirs = grid.dirs[:1] if _trace_is_radial(E, grid) else grid.dirs
    inv_vol = 1.0 / grid.volume

    def core(r):
        tv = _trace_grid_values(E, r, dirs)
        if dirs.shape[0] == 1:
            avg = tv[..., 0]
        else:
            avg = np.tensordot(tv, grid.weights, axes=([-1], [0])) * inv_vol
        return avg * np.power(np.asarray(r, dtype=complex), extra_power)

    if E.smoothing:
        return AsymFn(core, make_tail([], remainder_order=_SCHWARTZ + extra_power))
    if E.homog is not None:
        terms = []
        for k, m in E.homog.comps.items():
            tr = np.trace(m, axis1=-2, axis2=-1)
            c = complex(grid.average(tr))
            if c != 0:
                terms.append(LogPowerTerm(c, E.order - k + extra_power, 0))
        rem = (E.order.real - E.homog.depth + extra_power
               if math.isfinite(E.homog.depth) else _SCHWARTZ + extra_power)
        return AsymFn(core, make_tail(terms, remainder_order=rem,
                                      base_order=E.order + extra_power))
    # numerical extraction
    radii = np.geomspace(2.0, 2.0 ** (fit_depth / 2 + 3), 4 * fit_depth)
    vals = [complex(core(float(r))) for r in radii]
    basis = [(E.order + extra_power - k, 0) for k in range(fit_depth)]
    tail = fit_tail(list(zip(radii, vals)), basis, start_radius=1.0)
    return AsymFn(core, tail)


def ray_trace_asymfn(E: SuspendedElement, ray_index: int,
                     extra_power: int = 0) -> AsymFn:
    """Tr E along one grid ray; symbolic in r for q = 1."""
    grid = E.grid()
    d = grid.dirs[ray_index]
    if E.q == 1:
        subs = {"t1": ex.mul(ex.const(d[0]), ex.var("x"))}
        tr = ex.add(*(ex.substitute(E.entries[i, i], subs) for i in range(E.n)))
        if extra_power:
            tr = ex.mul(ex.pow_(ex.var("x"), ex.const(extra_power)), tr)
        core: object = tr
    else:
        def core(r, _d=d):
            tv = _trace_grid_values(E, r, _d.reshape(1, -1))[..., 0]
            return tv * np.power(np.asarray(r, dtype=complex), extra_power)
    if E.smoothing or E.homog is None:
        rem = _SCHWARTZ + extra_power if E.smoothing else None
        if rem is None:
            raise DomainError("ray profile needs homogeneous data or smoothing")
        return AsymFn(core, make_tail([], remainder_order=rem))
    terms = []
    for k, m in E.homog.comps.items():
        c = complex(np.trace(m[ray_index]))
        if c != 0:
            terms.append(LogPowerTerm(c, E.order - k + extra_power, 0))
    rem = (E.order.real - E.homog.depth + extra_power
           if math.isfinite(E.homog.depth) else _SCHWARTZ + extra_power)
    return AsymFn(core, make_tail(terms, remainder_order=rem,
                                  base_order=E.order + extra_power))


def trace_fz(A: SuspendedElement, D: ReferenceWeight, z: complex,
             k: int = 0, ray: int | str = "avg") -> AsymFn:
    """r -> Tr(|r theta|^k D^{-z} A)(r theta) as an AsymFn (per ray or averaged)."""
    E = compose(complex_power(D, z), A)
    if ray == "avg":
        return trace_asymfn(E, extra_power=k)
    return ray_trace_asymfn(E, int(ray), extra_power=k)


# --------------------------------------------------------------------------
# diagnostics
# --------------------------------------------------------------------------

def is_smoothing_sampled(E: SuspendedElement, power: float = 8.0,
                         span: float = 64.0) -> bool:
    """Sampled stand-in for the Schwartz condition: decay beats (1+r)^-power."""
    grid = E.grid()
    rs = np.geomspace(1.0, span, 12)
    sup = []
    for r in rs:
        vals = E(r * grid.dirs)
        sup.append(np.max(np.abs(vals)))
    sup = np.array(sup) * (1 + rs) ** power
    return bool(sup[-4:].max() <= max(2.0 * sup[0], 1e-9) + 1e-9)


def homog_consistency(E: SuspendedElement, span: float = 256.0, n_r: int = 24,
                      rays: int = 8) -> float:
    """Max ratio |E - declared expansion| / r^{order - depth} along rays."""
    if E.homog is None:
        raise DomainError("no declared homogeneous data")
    grid = E.grid()
    step = max(1, grid.size // rays)
    dirs = grid.dirs[::step]
    rs = np.geomspace(1.0, span, n_r)
    rem_order = (E.order.real - E.homog.depth
                 if math.isfinite(E.homog.depth) else _SCHWARTZ)
    worst = 0.0
    for gi, d in enumerate(dirs):
        vals = E(np.multiply.outer(rs, d))
        approx = np.zeros_like(vals)
        scale = np.zeros(len(rs))
        for k, m in E.homog.comps.items():
            piece = np.power(rs.astype(complex), E.order - k)[:, None, None] * m[gi * step]
            approx += piece
            scale = np.maximum(scale, np.max(np.abs(piece), axis=(1, 2)))
        resid = np.max(np.abs(vals - approx), axis=(1, 2))
        # floor the bound at double-precision noise of the summed terms
        bound = np.maximum(np.power(rs, rem_order), 1e-14 * np.maximum(scale, 1e-30))
        ratio = resid / bound
        ratio = ratio[np.isfinite(ratio)]
        if ratio.size:
            worst = max(worst, float(ratio.max()))
    return worst


def extract_homog(E: SuspendedElement, depth: int,
                  radii=None) -> HomogData:
    """Numerically extract homogeneous components by least squares on rays."""
    grid = E.grid()
    if radii is None:
        radii = np.geomspace(2.0, 2.0 ** (depth / 2.0 + 4), 6 * depth)
    powers = [E.order - k for k in range(depth)]
    cols = np.stack([np.power(radii.astype(complex), p) for p in powers], axis=1)
    comps = {k: np.zeros((grid.size, E.n, E.n), dtype=complex) for k in range(depth)}
    for gi in range(grid.size):
        vals = E(np.multiply.outer(radii, grid.dirs[gi]))   # (R, n, n)
        sol, *_ = np.linalg.lstsq(cols, vals.reshape(len(radii), -1), rcond=None)
        for k in range(depth):
            comps[k][gi] = sol[k].reshape(E.n, E.n)
    return HomogData(comps, float(depth))


# --------------------------------------------------------------------------
# demo circle backend (approximate; mode-boundary truncation)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TruncatedCircleBackend:
    """Bandwidth-V symbol on the circle, truncated at Fourier mode K.

    Coefficients a_nu(xi, tau) are expressions in (t1, t2) = (xi, tau)
    for |nu| <= V.  Demo only: composition is approximate near the mode
    boundary.
    """

    K: int
    V: int
    coeffs: Mapping[int, ex.Expr]

    def __post_init__(self):
        if self.V > self.K:
            raise BandwidthError("symbol bandwidth exceeds mode truncation")
        if any(abs(nu) > self.V for nu in self.coeffs):
            raise BandwidthError("coefficient outside the declared bandwidth")


def quantize_circle(backend: TruncatedCircleBackend, tau: float) -> np.ndarray:
    """(2K+1)^2 matrix with entry (m+nu, m) = a_nu(m, tau), |m|,|m+nu| <= K."""
    K = backend.K
    size = 2 * K + 1
    out = np.zeros((size, size), dtype=complex)
    for nu, a in backend.coeffs.items():
        for m in range(-K, K + 1):
            mp = m + nu
            if not -K <= mp <= K:
                continue
            out[mp + K, m + K] = ex.evaluate(a, t1=float(m), t2=float(tau))
    return out


# --------------------------------------------------------------------------
# fixture schema (JSON, versioned; unknown keys ignored)
# --------------------------------------------------------------------------

def _mat_to_json(M: np.ndarray):
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(M, dtype=complex)]


def _mat_from_json(rows) -> np.ndarray:
    return np.array([[complex(c[0], c[1]) for c in row] for row in rows])


def save_element(E: SuspendedElement) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "suspended_element",
        "q": E.q,
        "n": E.n,
        "order": [E.order.real, E.order.imag],
        "smoothing": E.smoothing,
        "entries": [[ex.to_text(E.entries[i, j]) for j in range(E.n)]
                    for i in range(E.n)],
    }
    if E.homog is not None:
        comps = {}
        grid = E.grid()
        for k, m in E.homog.comps.items():
            if E.q == 1:
                comps[str(k)] = {"kind": "pair",
                                 "plus": _mat_to_json(m[0]),
                                 "minus": _mat_to_json(m[1])}
            else:
                modes = _fourier_modes(m)
                ks = np.fft.fftfreq(grid.size, d=1.0 / grid.size).astype(int)
                nz = {}
                for idx, kk in enumerate(ks):
                    if np.max(np.abs(modes[idx])) > 1e-13:
                        nz[str(int(kk))] = _mat_to_json(modes[idx])
                comps[str(k)] = {"kind": "fourier", "modes": nz}
        doc["homog"] = {
            "depth": E.homog.depth if math.isfinite(E.homog.depth) else "exact",
            "components": comps,
        }
    return doc


def load_element(doc: Mapping) -> SuspendedElement:
    if doc.get("kind") != "suspended_element":
        raise DomainError("not a suspended-element document")
    q = int(doc["q"])
    n = int(doc["n"])
    order = complex(doc["order"][0], doc["order"][1])
    entries = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            entries[i, j] = ex.parse(doc["entries"][i][j])
    homog = None
    if "homog" in doc:
        grid = angular_grid(q)
        comps = {}
        for key, item in doc["homog"]["components"].items():
            k = int(key)
            if item["kind"] == "pair":
                comps[k] = np.stack([_mat_from_json(item["plus"]),
                                     _mat_from_json(item["minus"])])
            elif item["kind"] == "fourier":
                vals = np.zeros((grid.size, n, n), dtype=complex)
                th = _grid_angles(grid)
                for kk, m in item["modes"].items():
                    vals += np.exp(1j * int(kk) * th)[:, None, None] * _mat_from_json(m)
                comps[k] = vals
            elif item["kind"] == "const":
                comps[k] = np.broadcast_to(_mat_from_json(item["matrix"]),
                                           (grid.size, n, n)).copy()
            else:
                raise DomainError(f"unknown homog kind {item['kind']!r}")
        d = doc["homog"]["depth"]
        homog = HomogData(comps, math.inf if d == "exact" else float(d))
    return SuspendedElement(q, n, order, entries, homog,
                            bool(doc.get("smoothing", False)))
