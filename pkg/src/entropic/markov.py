"""Finite-state Markov chains: entropy production, ES/GC functionals from
Perron roots of twisted transfer matrices, finite-time functionals,
resonances and linear response of parametrised families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .core import (
    ExtReal,
    FunctionalKind,
    GeneratingFunction,
    TransportReport,
    check_symmetry,
    mixed_second_derivative,
    perron_root,
)
from .errors import (
    FDStepTooLarge,
    NoConvergence,
    NoDetailedBalanceAtZero,
    NonPositiveEntry,
    ParameterOutOfRange,
    SeriesDiverges,
)
from .sampler import SampleSet

ENTRY_FLOOR = 1e-12


@dataclass(frozen=True)
class MarkovChain:
    P: np.ndarray
    floor: float = ENTRY_FLOOR

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or len(P) < 2:
            raise ParameterOutOfRange("square matrix of size >= 2 required")
        if np.any(P < self.floor):
            raise NonPositiveEntry(f"entries below floor {self.floor}")
        if np.max(np.abs(P.sum(axis=1) - 1)) > 1e-12:
            raise ParameterOutOfRange("rows must sum to 1")
        P.setflags(write=False)
        object.__setattr__(self, "P", P)

    @property
    def size(self) -> int:
        return len(self.P)

    @cached_property
    def stationary(self) -> np.ndarray:
        _, left, _ = perron_root(self.P)
        return left


def reference_vector(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if np.any(q <= 0) or abs(q.sum() - 1) > 1e-12:
        raise ParameterOutOfRange("reference vector must be positive and sum to 1")
    return q


def stationary(chain: MarkovChain) -> np.ndarray:
    return chain.stationary


def ep_rate(chain: MarkovChain, tol: float = 1e-12):
    """(mean entropy production, Kolmogorov-Sinai entropy, detailed balance)."""
    P, pb = chain.P, chain.stationary
    flow = pb[:, None] * P
    sigma = float(np.sum(flow * np.log(P / P.T)))
    ks = float(-np.sum(flow * np.log(P)))
    return sigma, ks, bool(np.max(np.abs(flow - flow.T)) <= tol)


def p_alpha(P: np.ndarray, alpha: float) -> np.ndarray:
    return P ** (1 - alpha) * P.T ** alpha


def es_value(chain: MarkovChain, alpha: float) -> float:
    return math.log(perron_root(p_alpha(chain.P, alpha))[0])


def es_functional(chain: MarkovChain, alpha_grid) -> GeneratingFunction:
    return GeneratingFunction.tabulate(FunctionalKind.ES_LIMIT, alpha_grid,
                                       lambda a: es_value(chain, a), meta={"model": "markov"})


def twisted_matrix(chain: MarkovChain, q, alpha: float) -> np.ndarray:
    q = reference_vector(q)
    return p_alpha(chain.P, alpha) * (q[None, :] / q[:, None]) ** alpha


def finite_time_e_n(chain: MarkovChain, q, alpha: float, n: int) -> float:
    """log(q^T M(alpha)^n 1), accumulated with per-step rescaling."""
    q = reference_vector(q)
    M = twisted_matrix(chain, q, alpha)
    v = np.ones(chain.size)
    log_scale = 0.0
    for _ in range(n):
        v = M @ v
        s = v.max()
        v /= s
        log_scale += math.log(s)
    return log_scale + math.log(q @ v)


def path_enumeration_e_n(chain: MarkovChain, q, alpha: float, n: int) -> float:
    """log sum over all l^(n+1) paths of q_x0 prod p * exp(-alpha S_n sigma).

    Exponential in n; meant as an exhaustive cross-check for small n.
    """
    q = reference_vector(q)
    logP = np.log(chain.P)
    logratio = logP - logP.T
    # Path weights are built one step at a time over the full index grid.
    logw = np.log(q)                       # shape (l,) indexed by x0
    S = np.zeros(chain.size)
    first = np.arange(chain.size)
    last = first.copy()
    for _ in range(n):
        logw = (logw[:, None] + logP[last][:, :]).ravel()
        S = (S[:, None] + logratio[last]).ravel()
        first = np.repeat(first, chain.size)
        last = np.tile(np.arange(chain.size), len(last))
    S = S + np.log(q[first]) - np.log(q[last])
    terms = logw - alpha * S
    m = terms.max()
    return float(m + math.log(np.exp(terms - m).sum()))


def resolvent_series(chain: MarkovChain, q, alpha: float, z: float) -> ExtReal:
    """sum_n e^{-nz} q^T M^n 1 in closed form; raises past the pole.

    For a positive matrix B the Neumann series of (I - B)^-1 converges iff
    the inverse exists and is entrywise positive, which is tested directly.
    """
    q = reference_vector(q)
    B = math.exp(-z) * twisted_matrix(chain, q, alpha)
    try:
        R = np.linalg.inv(np.eye(chain.size) - B)
    except np.linalg.LinAlgError:
        raise SeriesDiverges(f"singular at z = {z}") from None
    if not np.all(R > 0):
        raise SeriesDiverges(f"z = {z} is at or left of the leading pole")
    return ExtReal.finite(float(q @ R @ np.ones(chain.size)))


def _converges(M, z):
    try:
        R = np.linalg.inv(np.eye(len(M)) - math.exp(-z) * M)
    except np.linalg.LinAlgError:
        return False
    return bool(np.all(R > 0))


def locate_resonance(chain: MarkovChain, alpha: float, q=None, xtol: float = 1e-15) -> float:
    """Abscissa of the leading pole of the resolvent series, by bisection on
    the convergence region. Independent of any eigenvalue solver."""
    q = np.full(chain.size, 1.0 / chain.size) if q is None else q
    M = twisted_matrix(chain, q, alpha)
    rows = M.sum(axis=1)
    # Perron root lies between the extreme row sums.
    lo, hi = math.log(rows.min()) - 1.0, math.log(rows.max()) + 1.0
    if _converges(M, lo) or not _converges(M, hi):
        raise NoConvergence("failed to bracket the pole")
    while hi - lo > xtol * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _converges(M, mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def resonance_residue(chain: MarkovChain, q, alpha: float) -> float:
    """Residue of the resolvent at its leading pole: (q.r)(l.1)/(l.r)."""
    q = reference_vector(q)
    _, left, right = perron_root(twisted_matrix(chain, q, alpha))
    return float((q @ right) * left.sum() / (left @ right))


def gap_rate(M: np.ndarray) -> float:
    """log(|lambda_2| / lambda_1): the exponential convergence rate of M^n."""
    ev = np.sort(np.abs(np.linalg.eigvals(M)))[::-1]
    return math.log(ev[1] / ev[0])


def sample_paths(chain: MarkovChain, q, n: int, count: int, seed: int,
                 flux_kernels: np.ndarray | None = None) -> SampleSet:
    """Paths x_0..x_n with x_0 ~ q; records S_n sigma and flux sums.

    ``flux_kernels`` has shape (channels, l, l); the flux of channel c along
    a path is sum_k flux_kernels[c, x_k, x_{k+1}].
    """
    q = reference_vector(q)
    rng = np.random.default_rng(seed)
    cum = np.cumsum(chain.P, axis=1)
    cum[:, -1] = 1.0
    logratio = np.log(chain.P / chain.P.T)
    x = np.searchsorted(np.cumsum(q), rng.random(count), side="right").clip(max=chain.size - 1)
    x0 = x.copy()
    S = np.zeros(count)
    nch = 0 if flux_kernels is None else len(flux_kernels)
    flux = np.zeros((count, nch))
    for _ in range(n):
        u = rng.random(count)
        y = (u[:, None] >= cum[x]).sum(axis=1).clip(max=chain.size - 1)
        S += logratio[x, y]
        for c in range(nch):
            flux[:, c] += flux_kernels[c][x, y]
        x = y
    S += np.log(q[x0]) - np.log(q[x])
    return SampleSet("markov", n, seed, S, flux if nch else None, {"x0": x0, "xn": x})


def rotor_chain(forward: float = 0.6, backward: float = 0.2, stay: float = 0.2, size: int = 3):
    """Ring with constant hopping probabilities; doubly stochastic."""
    P = np.zeros((size, size))
    for i in range(size):
        P[i, (i + 1) % size] += forward
        P[i, (i - 1) % size] += backward
        P[i, i] += stay
    return MarkovChain(P)


# ---------------------------------------------------------------------------
# Parametrised families and transport


@dataclass
class MarkovFamily:
    """X -> P(X), positive stochastic matrices depending smoothly on X.

    ``grad_log`` returns the array G[i, j, :] = grad_X log p_ij(X); when it is
    omitted a Richardson central difference is used.
    """

    dim: int
    kernel: Callable[[np.ndarray], np.ndarray]
    grad_log: Callable[[np.ndarray], np.ndarray] | None = None
    reference: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = "family"
    _nodes: tuple = field(default_factory=lambda: np.polynomial.legendre.leggauss(40), repr=False)

    def P(self, X) -> np.ndarray:
        return np.asarray(self.kernel(np.asarray(X, dtype=float)))

    def q(self, X) -> np.ndarray:
        if self.reference is not None:
            return self.reference(np.asarray(X, dtype=float))
        return MarkovChain(self.P(X)).stationary

    def _grad(self, X):
        if self.grad_log is not None:
            return self.grad_log(X)
        h = 1e-4
        out = np.zeros(self.P(X).shape + (self.dim,))
        for k in range(self.dim):
            e = np.zeros(self.dim)
            e[k] = 1.0

            def d(s):
                return (np.log(self.P(X + s * e)) - np.log(self.P(X - s * e))) / (2 * s)
            out[..., k] = (4 * d(h / 2) - d(h)) / 3
        return out

    def flux_kernel(self, X) -> np.ndarray:
        """F_X(i, j) = int_0^1 grad log p_ij(uX) du, shape (l, l, dim)."""
        X = np.asarray(X, dtype=float)
        nodes, weights = self._nodes
        u = 0.5 * (nodes + 1)
        return sum(0.5 * w * self._grad(ui * X) for ui, w in zip(u, weights))

    def flux(self, X) -> np.ndarray:
        """Antisymmetric flux kernels Phi_X(i, j) = F_X(i, j) - F_X(j, i), shape (dim, l, l)."""
        F = self.flux_kernel(X)
        return np.moveaxis(F - F.transpose(1, 0, 2), -1, 0)

    def tilted(self, X, Y) -> np.ndarray:
        Phi = self.flux(X)
        return self.P(X) * np.exp(-np.tensordot(np.asarray(Y, dtype=float), Phi, axes=1))

    def g(self, X, Y) -> float:
        """Limiting generalised ES functional: log Perron root of P(X, Y)."""
        return math.log(perron_root(self.tilted(X, Y))[0])


def tilted_symmetric_family(W=None) -> MarkovFamily:
    """3-state family: a symmetric kernel tilted by a cycle affinity X_1 and
    an affinity X_2 on the edge 0-1, then row-normalised."""
    W = np.array([[1.0, 0.8, 0.5], [0.8, 1.2, 0.7], [0.5, 0.7, 0.9]]) if W is None else np.asarray(W, float)
    A = np.zeros((2, 3, 3))
    for i in range(3):
        A[0, i, (i + 1) % 3] = 0.5
        A[0, (i + 1) % 3, i] = -0.5
    A[1, 0, 1], A[1, 1, 0] = 0.5, -0.5

    def kernel(X):
        K = W * np.exp(np.tensordot(X, A, axes=1))
        return K / K.sum(axis=1, keepdims=True)

    def grad_log(X):
        P = kernel(X)
        mean = np.einsum("ik,cik->ic", P, A)
        return np.moveaxis(A, 0, -1) - mean[:, None, :]

    return MarkovFamily(2, kernel, grad_log, name="tilted-symmetric-kernel")


def constant_family(P) -> MarkovFamily:
    P = np.asarray(P, dtype=float)
    return MarkovFamily(1, lambda X: P, lambda X: np.zeros(P.shape + (1,)), name="constant")


@dataclass
class FamilyCorrelations:
    """Exact equilibrium flux correlations of a family at X = 0."""

    P: np.ndarray
    pbar: np.ndarray
    Phi: np.ndarray        # (dim, l, l)

    @cached_property
    def _r(self):           # r[k, b] = sum_a pbar_a p_ab Phi^k_ab
        return np.einsum("a,ab,kab->kb", self.pbar, self.P, self.Phi)

    @cached_property
    def _f(self):           # f[j, c] = sum_d p_cd Phi^j_cd
        return np.einsum("cd,jcd->jc", self.P, self.Phi)

    def correlator(self, n: int) -> np.ndarray:
        """C[j, k] = omega(Phi^k Phi^j_n) for any integer lag n."""
        if n == 0:
            return np.einsum("a,ab,jab,kab->jk", self.pbar, self.P, self.Phi, self.Phi)
        if n < 0:
            return self.correlator(-n).T
        Pn = np.linalg.matrix_power(self.P, n - 1)
        return np.einsum("kb,bc,jc->jk", self._r, Pn, self._f)

    def gk_sum(self, tail_tol: float = 1e-13, maxiter: int = 100_000) -> np.ndarray:
        """sum over all integer lags of C(n), truncated by a geometric tail bound."""
        l = len(self.P)
        proj = np.outer(np.ones(l), self.pbar)
        rho = math.exp(gap_rate(self.P))
        rnorm = np.abs(self._r).sum(axis=1).max()
        fnorm = np.abs(self._f).max()
        total = self.correlator(0).copy()
        Q = np.eye(l)            # P^{n-1}
        for n in range(1, maxiter):
            C = np.einsum("kb,bc,jc->jk", self._r, Q, self._f)
            total += C + C.T
            Q = Q @ self.P
            bound = rnorm * fnorm * np.abs(Q - proj).sum(axis=1).max() / (1 - rho)
            if bound < tail_tol:
                return total
        raise NoConvergence("correlation sum did not converge")

    def finite_time_covariance(self, t: int) -> np.ndarray:
        """sum_{|n|<t} (1 - |n|/t) C(n) from closed-form matrix geometric sums."""
        l = len(self.P)
        Q = self.P - np.outer(np.ones(l), self.pbar)
        Minv = np.linalg.inv(np.eye(l) - Q)
        M = t - 2
        if M < 0:
            return self.correlator(0)
        QM1 = np.linalg.matrix_power(Q, M + 1)
        geo = (np.eye(l) - QM1) @ Minv
        lin = (np.eye(l) - (M + 2) * QM1 + (M + 1) * QM1 @ Q) @ Minv @ Minv
        S = geo - lin / t
        C = np.einsum("kb,bc,jc->jk", self._r, S, self._f)
        return self.correlator(0) + C + C.T


def family_correlations(family: MarkovFamily) -> FamilyCorrelations:
    X0 = np.zeros(family.dim)
    chain = MarkovChain(family.P(X0))
    return FamilyCorrelations(chain.P, chain.stationary, family.flux(X0))


def family_transport(family: MarkovFamily, fd_step: float = 1e-3, fd_tol: float = 1e-4,
                     ggc_grid=None) -> TransportReport:
    """Kinetic coefficients of a family at X = 0, extracted three ways:
    (a) L = -d_X d_Y g, (b) L = (1/2) d_Y d_Y g, (c) the exact correlation sum.

    D is the Hessian of g(0, .), i.e. the asymptotic flux covariance.
    """
    X0 = np.zeros(family.dim)
    chain = MarkovChain(family.P(X0))
    _, _, db = ep_rate(chain)
    if not db:
        raise NoDetailedBalanceAtZero(f"{family.name} violates detailed balance at X = 0")
    sd = mixed_second_derivative(family.g, X0, X0, fd_step)
    if sd.richardson_gap > fd_tol:
        raise FDStepTooLarge(f"Richardson gap {sd.richardson_gap:.3g} exceeds {fd_tol:.3g}")
    L_mixed = -sd.mixed
    L_hess = 0.5 * sd.yy
    corr = family_correlations(family)
    gk = 0.5 * corr.gk_sum()
    D = sd.yy
    extra = {"L_hessian": L_hess, "richardson_gap": sd.richardson_gap,
             "fd_vs_gk": float(np.max(np.abs(L_mixed - gk))),
             "hessian_vs_gk": float(np.max(np.abs(L_hess - gk))),
             "correlations": corr}
    if ggc_grid is not None:
        extra["ggc_residual"] = ggc_residual(family, ggc_grid)
    return TransportReport(L_mixed, D, gk, float(np.max(np.abs(L_mixed - L_mixed.T))),
                           float(np.max(np.abs(D - 2 * L_mixed))), extra)


def ggc_residual(family: MarkovFamily, points) -> float:
    """sup over (X, Y) of |g(X, Y) - g(X, X - Y)|."""
    worst = 0.0
    for X, Y in points:
        X, Y = np.asarray(X, float), np.asarray(Y, float)
        worst = max(worst, abs(family.g(X, Y) - family.g(X, X - Y)))
    return worst


def ges_symmetry_report(family: MarkovFamily, X, Y_grid, tol: float = 1e-10):
    X = np.asarray(X, float)
    Y_grid = np.asarray(Y_grid, float)
    gf = GeneratingFunction.tabulate(FunctionalKind.GES_LIMIT, Y_grid, lambda Y: family.g(X, Y),
                                     meta={"model": family.name, "X": X.tolist()})
    return check_symmetry(gf, X, tol)
