"""Model-independent numerics: extended reals, generating/rate functions,
convex conjugation, symmetry audits, Perron roots, log-determinants,
quadrature and finite-difference derivatives.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import (
    Asymmetric,
    EmptyDomain,
    GridNotSymmetric,
    NoConvergence,
    NonConvexInput,
    NonPositiveEntry,
    StencilOutsideDomain,
    TailBoundMissing,
)


# ---------------------------------------------------------------------------
# Extended reals


class Kind(enum.IntEnum):
    NEG_INF = -1
    FINITE = 0
    POS_INF = 1


@dataclass(frozen=True)
class ExtReal:
    """A real number or one of the two infinities, carried as an explicit tag."""

    value: float = 0.0
    kind: Kind = Kind.FINITE

    @classmethod
    def finite(cls, value: float) -> "ExtReal":
        return cls(float(value), Kind.FINITE)

    @classmethod
    def pos_inf(cls) -> "ExtReal":
        return cls(math.nan, Kind.POS_INF)

    @classmethod
    def neg_inf(cls) -> "ExtReal":
        return cls(math.nan, Kind.NEG_INF)

    @property
    def is_finite(self) -> bool:
        return self.kind is Kind.FINITE

    def __neg__(self) -> "ExtReal":
        return ExtReal(-self.value if self.is_finite else math.nan, Kind(-self.kind))

    def scale(self, c: float) -> "ExtReal":
        """Multiply by a real constant; 0 times an infinity is rejected."""
        if self.is_finite:
            return ExtReal.finite(c * self.value)
        if c == 0:
            raise ValueError("0 * infinity is undefined")
        return ExtReal(math.nan, Kind(self.kind if c > 0 else -self.kind))

    def __float__(self) -> float:
        # Boundary conversion only (plots, CSV); arithmetic stays tagged.
        if self.is_finite:
            return self.value
        return math.inf if self.kind is Kind.POS_INF else -math.inf


def as_ext(x) -> ExtReal:
    if isinstance(x, ExtReal):
        return x
    x = float(x)
    if math.isnan(x):
        raise ValueError("NaN is not an extended real")
    if math.isinf(x):
        return ExtReal.pos_inf() if x > 0 else ExtReal.neg_inf()
    return ExtReal.finite(x)


def _states_and_values(items) -> tuple[np.ndarray, np.ndarray]:
    ext = [as_ext(v) for v in items]
    states = np.array([int(e.kind) for e in ext], dtype=np.int8)
    values = np.array([e.value if e.is_finite else np.nan for e in ext])
    return states, values


# ---------------------------------------------------------------------------
# Generating and rate functions


class FunctionalKind(str, enum.Enum):
    ES_FINITE = "ES_finite"
    ES_LIMIT = "ES_limit"
    GC_LIMIT = "GC_limit"
    GES_FINITE = "GES_finite"
    GES_LIMIT = "GES_limit"


@dataclass
class GeneratingFunction:
    """A cumulant-type functional sampled on a grid of alpha (or Y) points.

    ``values`` holds finite entries; ``states`` holds the extended-real tag of
    every point (0 finite, +1 for +inf, -1 for -inf). ``func`` optionally
    evaluates the functional off-grid and is used for refinement only.
    """

    kind: FunctionalKind
    grid: np.ndarray
    values: np.ndarray
    states: np.ndarray
    horizon: float | None = None
    meta: dict = field(default_factory=dict)
    func: Callable | None = field(default=None, repr=False, compare=False)

    @classmethod
    def from_values(cls, kind, grid, values, horizon=None, meta=None, func=None):
        states, vals = _states_and_values(values)
        return cls(FunctionalKind(kind), np.asarray(grid, dtype=float), vals, states,
                   horizon, dict(meta or {}), func)

    @classmethod
    def tabulate(cls, kind, grid, func, horizon=None, meta=None):
        grid = np.asarray(grid, dtype=float)
        return cls.from_values(kind, grid, [func(p) for p in grid], horizon, meta, func)

    @property
    def finite(self) -> np.ndarray:
        return self.states == 0

    def at(self, i: int) -> ExtReal:
        if self.states[i] == 0:
            return ExtReal.finite(self.values[i])
        return ExtReal(math.nan, Kind(int(self.states[i])))

    def to_csv(self, path) -> None:
        grid = self.grid.reshape(len(self.grid), -1)
        header = [f"p{k}" for k in range(grid.shape[1])] + ["value", "finite_flag"]
        with open(path, "w", newline="") as fh:
            fh.write(f"# kind={self.kind.value} horizon={self.horizon} "
                     f"model={self.meta.get('model', '')}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for p, v, s in zip(grid, self.values, self.states):
                w.writerow([fmt(x) for x in p] + [fmt(v) if s == 0 else fmt(s * math.inf), int(s == 0)])


@dataclass
class RateFunction:
    """Legendre-type conjugate I(s) = inf_a (a*s + e(a)), values in [-inf, 0]."""

    s_grid: np.ndarray
    values: np.ndarray
    states: np.ndarray
    mean: float
    validity: tuple[float, float]
    meta: dict = field(default_factory=dict)

    @property
    def finite(self) -> np.ndarray:
        return self.states == 0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# kind=rate mean={fmt(self.mean)} validity=({fmt(self.validity[0])},"
                     f"{fmt(self.validity[1])}) model={self.meta.get('model', '')}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["s", "value", "finite_flag"])
            for s, v, st in zip(self.s_grid, self.values, self.states):
                w.writerow([fmt(s), fmt(v) if st == 0 else fmt(st * math.inf), int(st == 0)])


@dataclass
class SymmetryReport:
    max_residual: float
    argmax: object
    grid: np.ndarray
    tol: float
    passed: bool


@dataclass
class TransportReport:
    L: np.ndarray
    D: np.ndarray
    gk_sum: np.ndarray
    orr_residual: float
    einstein_residual: float
    extra: dict = field(default_factory=dict)


def fmt(x: float) -> str:
    """17 significant digits, enough for an exact float round trip."""
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# Convex conjugation


def _slopes(x, y):
    return np.diff(y) / np.diff(x)


def _golden_min(h, a, b, tol=1e-12, maxiter=200):
    g = (math.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = h(c), h(d)
    for _ in range(maxiter):
        if abs(b - a) < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = h(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = h(d)
    x = (a + b) / 2
    return x, h(x)


def legendre_conjugate(e: GeneratingFunction, s_grid, tol: float = 1e-9) -> RateFunction:
    """I(s) = inf over alpha of (alpha*s + e(alpha)) for a scalar-grid functional.

    The grid minimum brackets the infimum; when ``e.func`` is available the
    bracket is refined by golden-section search. Outside the range of
    subgradients represented on the grid the infimum is reported as -inf.
    """
    if e.grid.ndim != 1:
        raise ValueError("legendre_conjugate needs a scalar grid")
    fin = e.finite
    if not fin.any():
        raise EmptyDomain("all values are infinite")
    if fin.sum() < 3:
        raise NonConvexInput("need at least three finite points")
    a, v = e.grid[fin], e.values[fin]
    sl = _slopes(a, v)
    scale = max(1.0, float(np.max(np.abs(v))))
    if np.any(np.diff(sl) < -tol * scale / max(np.min(np.diff(a)), 1e-300)):
        raise NonConvexInput("discrete slopes decrease")
    # Finite region touching an explicit +inf flag is a genuine domain edge.
    idx = np.flatnonzero(fin)
    closed_lo = idx[0] > 0 and e.states[idx[0] - 1] == Kind.POS_INF
    closed_hi = idx[-1] < len(e.states) - 1 and e.states[idx[-1] + 1] == Kind.POS_INF
    s_lo, s_hi = -sl[-1], -sl[0]
    stol = tol * max(1.0, abs(s_lo), abs(s_hi))

    s_grid = np.asarray(s_grid, dtype=float)
    out, states = np.zeros_like(s_grid), np.zeros(len(s_grid), dtype=np.int8)
    for i, s in enumerate(s_grid):
        if (s < s_lo - stol and not closed_hi) or (s > s_hi + stol and not closed_lo):
            out[i], states[i] = np.nan, Kind.NEG_INF
            continue
        h = a * s + v
        k = int(np.argmin(h))
        best = h[k]
        if e.func is not None:
            lo, hi = a[max(k - 1, 0)], a[min(k + 1, len(a) - 1)]
            if hi > lo:
                _, val = _golden_min(lambda x: x * s + float(as_ext(e.func(x))), lo, hi)
                best = min(best, val)
        out[i] = best
    # Mean: zero of the conjugate slope, i.e. minus the derivative of e at 0.
    mean = -_derivative_at_zero(e, a, v)
    return RateFunction(s_grid, out, states, mean, (s_lo, s_hi), dict(e.meta))


def _derivative_at_zero(e, a, v):
    if e.func is not None:
        h = 1e-5
        return (float(as_ext(e.func(h))) - float(as_ext(e.func(-h)))) / (2 * h)
    k = int(np.searchsorted(a, 0.0))
    k = min(max(k, 1), len(a) - 1)
    return (v[k] - v[k - 1]) / (a[k] - a[k - 1])


# ---------------------------------------------------------------------------
# Symmetry audits


def check_symmetry(f: GeneratingFunction, center=None, tol: float = 1e-8) -> SymmetryReport:
    """Sup residual of f against its image under alpha -> 1-alpha or Y -> X-Y.

    ``center`` is None for the scalar involution, or the vector X.
    """
    grid = f.grid
    if center is None:
        image = 1.0 - grid
    else:
        image = np.asarray(center, dtype=float) - grid
    resid = np.zeros(len(grid))
    for i, p in enumerate(grid):
        lhs = f.at(i)
        rhs = _value_at(f, image[i])
        if lhs.is_finite and rhs.is_finite:
            resid[i] = abs(lhs.value - rhs.value)
        elif lhs.kind == rhs.kind:
            resid[i] = 0.0
        else:
            resid[i] = math.inf
    k = int(np.argmax(resid))
    r = float(resid[k])
    return SymmetryReport(r, grid[k], grid, tol, r <= tol)


def _value_at(f: GeneratingFunction, p) -> ExtReal:
    if f.func is not None:
        return as_ext(f.func(p))
    g = f.grid
    if g.ndim == 1:
        if not (g.min() - 1e-12 <= p <= g.max() + 1e-12):
            raise GridNotSymmetric(f"image {p} outside grid hull")
        j = int(np.argmin(np.abs(g - p)))
        if abs(g[j] - p) <= 1e-12:
            return f.at(j)
        if not f.finite.all():
            raise GridNotSymmetric("cannot interpolate across infinite values")
        return ExtReal.finite(np.interp(p, g, f.values))
    d = np.max(np.abs(g - p), axis=1)
    j = int(np.argmin(d))
    if d[j] > 1e-12:
        raise GridNotSymmetric(f"image {p} not on grid")
    return f.at(j)


# ---------------------------------------------------------------------------
# Linear algebra


def perron_root(A, tol: float = 1e-13, maxiter: int = 100_000):
    """Spectral radius and positive left/right eigenvectors (each summing to 1)
    of an entrywise positive matrix, by shifted power iteration."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("square matrix required")
    if not np.all(A > 0):
        raise NonPositiveEntry("Perron root needs strictly positive entries")
    c = float(np.max(np.diag(A)))
    B = A + c * np.eye(len(A))
    right, lam_r = _power(B, tol, maxiter)
    left, lam_l = _power(B.T, tol, maxiter)
    value = 0.5 * (lam_r + lam_l) - c
    return value, left, right


def _power(B, tol, maxiter):
    v = np.full(len(B), 1.0 / len(B))
    lam = 0.0
    for _ in range(maxiter):
        w = B @ v
        lam_new = w.sum() / v.sum()
        w /= w.sum()
        if np.max(np.abs(w - v)) <= tol * np.max(w) and abs(lam_new - lam) <= tol * abs(lam_new):
            # One Rayleigh-type correction with the converged vector.
            return w, float((B @ w).sum() / w.sum())
        v, lam = w, lam_new
    raise NoConvergence("power iteration did not converge")


def sym_logdet(A, sym_tol: float = 1e-12) -> ExtReal:
    """log det A via Cholesky; -inf when A is not positive definite."""
    A = np.asarray(A, dtype=float)
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A - A.T)) > sym_tol * scale:
        raise Asymmetric("matrix is not symmetric")
    try:
        C = np.linalg.cholesky(0.5 * (A + A.T))
    except np.linalg.LinAlgError:
        return ExtReal.neg_inf()
    return ExtReal.finite(2.0 * np.sum(np.log(np.diag(C))))


# ---------------------------------------------------------------------------
# Quadrature


def adaptive_quad(f, a: float, b: float, tol: float = 1e-10,
                  tail: Callable[[float, float], float] | None = None,
                  points: Sequence[float] = ()) -> float:
    """Integral of f over [a, b] to absolute error tol; a or b may be infinite.

    For infinite ends, ``tail(lo, hi)`` must bound the integral of |f|
    outside [lo, hi]. The window grows until that bound drops below tol/10,
    and is then doubled once more as a self-check.
    """
    infinite = math.isinf(a) or math.isinf(b)
    if not infinite:
        return _quad(f, a, b, tol, points)
    if tail is None:
        raise TailBoundMissing("infinite domain needs a tail bound")
    pts = [p for p in points if a < p < b]
    lo = min(pts, default=0.0) if math.isinf(a) else a
    hi = max(pts, default=0.0) if math.isinf(b) else b
    width = 1.0
    for _ in range(200):
        lo_w = lo - width if math.isinf(a) else a
        hi_w = hi + width if math.isinf(b) else b
        if tail(lo_w, hi_w) < tol / 10:
            break
        width *= 2
    else:
        raise NoConvergence("tail bound never fell below tolerance")
    first = _quad(f, lo_w, hi_w, tol / 10, pts)
    width *= 2
    lo_w = lo - width if math.isinf(a) else a
    hi_w = hi + width if math.isinf(b) else b
    second = _quad(f, lo_w, hi_w, tol / 10, pts)
    if abs(second - first) > tol:
        raise NoConvergence(f"window doubling changed the integral by {abs(second - first):.3g}")
    return second


def _quad(f, a, b, tol, points=()):
    pts = sorted(p for p in points if a < p < b)
    val, err = integrate.quad(f, a, b, epsabs=tol, epsrel=0.0, limit=500,
                              points=pts or None)
    if err > tol:
        raise NoConvergence(f"quadrature error estimate {err:.3g} above {tol:.3g}")
    return val


# ---------------------------------------------------------------------------
# Finite differences


@dataclass
class SecondDerivatives:
    mixed: np.ndarray        # mixed[j, k] = d/dY_j d/dX_k f
    yy: np.ndarray           # yy[j, k] = d/dY_j d/dY_k f
    richardson_gap: float    # max |D(h/2) - D(h)| before extrapolation


def mixed_second_derivative(f: Callable, X, Y, h: float = 1e-3) -> SecondDerivatives:
    """Central-difference second derivatives of f(X, Y), Richardson-extrapolated."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)

    def ev(x, y):
        v = as_ext(f(x, y))
        if not v.is_finite:
            raise StencilOutsideDomain(f"f is infinite at X={x}, Y={y}")
        return v.value

    def stencil(step):
        nx, ny = len(X), len(Y)
        mixed = np.zeros((ny, nx))
        yy = np.zeros((ny, ny))
        ex, ey = np.eye(nx) * step, np.eye(ny) * step
        for j in range(ny):
            for k in range(nx):
                mixed[j, k] = (ev(X + ex[k], Y + ey[j]) - ev(X + ex[k], Y - ey[j])
                               - ev(X - ex[k], Y + ey[j]) + ev(X - ex[k], Y - ey[j])) / (4 * step**2)
            for k in range(j, ny):
                yy[j, k] = yy[k, j] = (ev(X, Y + ey[j] + ey[k]) - ev(X, Y + ey[j] - ey[k])
                                       - ev(X, Y - ey[j] + ey[k]) + ev(X, Y - ey[j] - ey[k])) / (4 * step**2)
        return mixed, yy

    m1, y1 = stencil(h)
    m2, y2 = stencil(h / 2)
    gap = float(max(np.max(np.abs(m2 - m1)), np.max(np.abs(y2 - y1))))
    return SecondDerivatives((4 * m2 - m1) / 3, (4 * y2 - y1) / 3, gap)
