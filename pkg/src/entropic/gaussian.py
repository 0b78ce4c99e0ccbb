"""Finite-dimensional Gaussian dynamical systems and the harmonic chain:
covariance propagation, entropy production, log-determinant functionals,
asymptotic functionals and thermodynamic-limit closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .core import ExtReal, RateFunction, TransportReport, adaptive_quad, mixed_second_derivative, sym_logdet
from .errors import NoLimit, NotInOBeta, OutsideStrip, ParameterOutOfRange
from .sampler import SampleSet

KAPPA = (math.sqrt(5) - 1) / (2 * math.pi)


@dataclass(frozen=True)
class GaussianSystem:
    """Linear flow x' = L x with a centred Gaussian reference state.

    ``control_forms`` are the matrices K_j with k(X) = sum_j X_j K_j, and
    ``reference_form`` is the matrix whose shift by -k(X) gives D0^-1 (beta*h
    for the chain). ``modes`` holds (U, w) with a q-block U diag(w^2) U^T when
    the flow is a system of coupled oscillators, enabling exact rotation.
    """

    generator: np.ndarray
    D0: np.ndarray
    involution: np.ndarray | None = None
    fluxes: dict = field(default_factory=dict)
    X: np.ndarray | None = None
    control_forms: tuple = ()
    reference_form: np.ndarray | None = None
    D0_inv: np.ndarray | None = None
    modes: tuple | None = None
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.generator)

    def k(self, Y) -> np.ndarray:
        return sum(y * K for y, K in zip(np.asarray(Y, float), self.control_forms))

    def precision(self, X=None) -> np.ndarray:
        """D_X^-1; for X other than the system's own, rebuilt from the reference form."""
        if X is None:
            return self.D0_inv if self.D0_inv is not None else np.linalg.inv(self.D0)
        return self.reference_form - self.k(X)


@dataclass(frozen=True)
class ChainSpec:
    n: int
    m: int
    beta: float
    X: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not (self.n > self.m >= 0):
            raise ParameterOutOfRange("need n > m >= 0")
        if self.beta <= 0:
            raise ParameterOutOfRange("beta must be positive")


def _chain_forms(spec: ChainSpec):
    N = 2 * spec.n + 1
    sites = np.arange(-spec.n, spec.n + 1)
    hq = 3 * np.eye(N) - np.eye(N, k=1) - np.eye(N, k=-1)
    Z = np.zeros((N, N))

    def restricted(mask):
        mask = mask.astype(float)
        return np.block([[np.diag(mask), Z], [Z, hq * np.outer(mask, mask)]])

    h = np.block([[np.eye(N), Z], [Z, hq]])
    return hq, h, restricted(sites < -spec.m), restricted(sites > spec.m)


def chain_precision_floor(spec: ChainSpec) -> float:
    """Smallest eigenvalue of beta*h - k(X)."""
    _, h, hL, hR = _chain_forms(spec)
    return float(np.linalg.eigvalsh(spec.beta * h - spec.X[0] * hL - spec.X[1] * hR).min())


def build_harmonic_chain(spec: ChainSpec) -> GaussianSystem:
    """Harmonic chain on {-n..n} with Dirichlet walls; reservoirs are the
    sites left of -m and right of m. State ordering is (p, q)."""
    N = 2 * spec.n + 1
    hq, h, hL, hR = _chain_forms(spec)
    Z = np.zeros((N, N))
    Lg = np.block([[Z, -hq], [np.eye(N), Z]])
    theta = np.diag(np.r_[-np.ones(N), np.ones(N)])

    def flux_form(p_site, q_site):
        # quadratic form of 2 * (-p_a q_b)
        phi = np.zeros((2 * N, 2 * N))
        a, b = p_site + spec.n, N + q_site + spec.n
        phi[a, b] = phi[b, a] = -1.0
        return phi

    fluxes = {"L": flux_form(-spec.m - 1, -spec.m), "R": flux_form(spec.m + 1, spec.m)}
    X = np.asarray(spec.X, dtype=float)
    ref = spec.beta * h
    Dinv = ref - X[0] * hL - X[1] * hR
    lam = np.linalg.eigvalsh(Dinv).min()
    if lam <= 0:
        raise NotInOBeta(f"beta*h - k(X) has eigenvalue {lam:.6g}")
    w2, U = np.linalg.eigh(hq)
    return GaussianSystem(Lg, np.linalg.inv(Dinv), theta, fluxes, X, (hL, hR), ref, Dinv,
                          (U, np.sqrt(w2)),
                          {"model": "harmonic-chain", "n": spec.n, "m": spec.m,
                           "beta": spec.beta, "h": h})


# ---------------------------------------------------------------------------
# Flow and covariances


def flow_matrix(system: GaussianSystem, t: float, route: str = "auto") -> np.ndarray:
    """e^{tL}. The 'rotation' route diagonalises the oscillator block exactly;
    'pade' uses scaling and squaring."""
    if route == "pade" or (route == "auto" and system.modes is None):
        return linalg.expm(t * system.generator)
    U, w = system.modes
    c, s = np.cos(w * t), np.sin(w * t)
    Pp = (U * c) @ U.T
    Pq = -(U * (w * s)) @ U.T
    Qp = (U * (s / w)) @ U.T
    return np.block([[Pp, Pq], [Qp, Pp]])


def propagate(system: GaussianSystem, t: float) -> np.ndarray:
    """D_t = e^{tL} D0 e^{tL^T}."""
    if t == 0:
        return system.D0.copy()
    E = flow_matrix(system, t)
    return E @ system.D0 @ E.T


def propagate_from(system: GaussianSystem, D: np.ndarray, t: float) -> np.ndarray:
    E = flow_matrix(system, t)
    return E @ D @ E.T


def sigma_matrix(system: GaussianSystem) -> np.ndarray:
    Dinv = system.precision()
    Lg = system.generator
    return 0.5 * (Lg.T @ Dinv + Dinv @ Lg)


def sigma_at(system: GaussianSystem, x) -> np.ndarray:
    """Entropy production observable x.S x - tr(D0 S); x may be a batch of rows."""
    S = sigma_matrix(system)
    x = np.atleast_2d(x)
    return np.einsum("ij,jk,ik->i", x, S, x) - np.trace(system.D0 @ S)


def ges_finite(system: GaussianSystem, Y, t: float, X=None) -> ExtReal:
    """g_t(X, Y) = -1/2 log det(I - D_X A), A = e^{tL^T} k(Y) e^{tL} - k(Y).

    Evaluated as -1/2 [log det(D_X^-1 - A) - log det(D_X^-1)] so that only
    symmetric matrices are factorised; +inf outside the domain.
    """
    P = system.precision(X)
    E = flow_matrix(system, t)
    kY = system.k(Y)
    A = E.T @ kY @ E - kY
    M = P - A
    ld = sym_logdet(0.5 * (M + M.T))
    if not ld.is_finite:
        return ExtReal.pos_inf()
    return ExtReal.finite(-0.5 * (ld.value - sym_logdet(P).value))


def es_finite(system: GaussianSystem, alpha: float, t: float) -> ExtReal:
    """log omega(exp(-alpha * int_0^t sigma)) from the Gaussian Renyi formula
    with covariances D_t and D0."""
    Dinv = system.precision()
    E_inv = flow_matrix(system, -t)
    Dt_inv = E_inv.T @ Dinv @ E_inv
    ld_D = -sym_logdet(Dinv).value
    ld_Dt = ld_D + 2 * t * np.trace(system.generator)
    M = (1 - alpha) * Dt_inv + alpha * Dinv
    ld_M = sym_logdet(0.5 * (M + M.T))
    if not ld_M.is_finite:
        return ExtReal.pos_inf()
    return ExtReal.finite(-0.5 * ((1 - alpha) * ld_Dt + alpha * ld_D + ld_M.value))


def gaussian_relative_entropy(D_nu: np.ndarray, D_omega: np.ndarray) -> float:
    """Ent(nu|omega) = -1/2 [tr(Dw^-1 Dn) - d - log det(Dw^-1 Dn)] (always <= 0)."""
    R = np.linalg.solve(D_omega, D_nu)
    ld = np.linalg.slogdet(D_nu)[1] - np.linalg.slogdet(D_omega)[1]
    return -0.5 * (np.trace(R) - len(R) - ld)


@dataclass
class EntropyBalance:
    quadrature: float
    closed_form: float
    discrepancy: float


def entropy_balance(system: GaussianSystem, t: float, tol: float = 1e-11) -> EntropyBalance:
    """Ent(omega_t|omega) two ways: time integral of the mean entropy
    production and the Gaussian relative-entropy formula."""
    if t == 0:
        return EntropyBalance(0.0, 0.0, 0.0)
    S = sigma_matrix(system)
    D = system.D0
    base = np.sum(S * D)

    def rate(s):
        return np.sum(S * propagate(system, s)) - base

    quad = -adaptive_quad(rate, 0.0, t, tol)
    closed = gaussian_relative_entropy(propagate(system, t), D)
    return EntropyBalance(quad, closed, abs(quad - closed))


# ---------------------------------------------------------------------------
# Asymptotic functional


def cesaro_covariance(system: GaussianSystem, t1: float, t2: float, samples: int = 41) -> np.ndarray:
    """Window average of D_t over [t1, t2]; the stand-in for D_+ on a finite chain."""
    ts = np.linspace(t1, t2, samples)
    return sum(propagate(system, t) for t in ts) / samples


def detect_limit(system: GaussianSystem, t_max: float = 200.0, step: float = 1.0,
                 tol: float = 1e-9) -> np.ndarray:
    """D_t for the first t at which consecutive covariances agree within tol."""
    prev = system.D0
    t = step
    while t <= t_max:
        cur = propagate(system, t)
        if np.max(np.abs(cur - prev)) < tol:
            return cur
        prev, t = cur, t + step
    raise NoLimit("covariance did not settle; supply D_+ (e.g. a window average)")


class AsymptoticFunctional:
    """e(alpha) = -int_0^alpha tr(S D_gamma) d gamma with
    D_gamma^-1 = (1-gamma) D_+^-1 + gamma D_-^-1 and D_- = theta D_+ theta.

    The generalised eigenproblem (D_-^-1 - D_+^-1) v = lam D_+^-1 v reduces
    the integrand to sum_i c_i / (1 + gamma lam_i).
    """

    def __init__(self, system: GaussianSystem, D_plus: np.ndarray | None = None):
        if D_plus is None:
            D_plus = detect_limit(system)
        th = system.involution
        if th is None:
            raise ParameterOutOfRange("an involution is required")
        self.system = system
        self.D_plus = 0.5 * (D_plus + D_plus.T)
        self.D_minus = th @ self.D_plus @ th
        Pp = np.linalg.inv(self.D_plus)
        Pm = np.linalg.inv(self.D_minus)
        Pp, Pm = 0.5 * (Pp + Pp.T), 0.5 * (Pm + Pm.T)
        lam, V = linalg.eigh(Pm - Pp, Pp)
        S = sigma_matrix(system)
        self.lam = lam
        self.c = np.einsum("ji,jk,ki->i", V, S, V)
        spec = np.concatenate([np.linalg.eigvalsh(system.D0), np.linalg.eigvalsh(self.D_plus)])
        self.m_minus, self.m_plus = float(spec.min()), float(spec.max())
        self.delta = self.m_minus / (self.m_plus - self.m_minus)

    def integrand(self, gamma: float) -> float:
        return float(np.sum(self.c / (1 + gamma * self.lam)))

    def in_strip(self, alpha: float) -> bool:
        return -self.delta < alpha < 1 + self.delta

    def __call__(self, alpha: float, tol: float = 1e-13) -> float:
        if not self.in_strip(alpha):
            raise OutsideStrip(f"alpha = {alpha} outside ]-{self.delta:.4g}, 1+{self.delta:.4g}[")
        if alpha == 0:
            return 0.0
        return -adaptive_quad(self.integrand, 0.0, alpha, tol)

    def closed_form(self, alpha: float) -> float:
        lam, c = self.lam, self.c
        small = np.abs(lam) < 1e-14
        terms = np.where(small, c * alpha, c * np.log1p(alpha * np.where(small, 1.0, lam))
                         / np.where(small, 1.0, lam))
        return -float(np.sum(terms))


def asymptotic_functional(system: GaussianSystem, alpha: float, D_plus=None) -> float:
    return AsymptoticFunctional(system, D_plus)(alpha)


# ---------------------------------------------------------------------------
# Chain observables


def flux_time_average(system: GaussianSystem, channel: int, t1: float, t2: float) -> float:
    """(1/(t2-t1)) int_{t1}^{t2} omega_X(Phi_s) ds for reservoir ``channel``,
    via the energy change of that reservoir."""
    K = system.control_forms[channel]
    E1, E2 = flow_matrix(system, t1), flow_matrix(system, t2)
    D = system.D0
    return -0.5 * np.sum(D * (E2.T @ K @ E2 - E1.T @ K @ E1)) / (t2 - t1)


def mean_flux(system: GaussianSystem, name: str, t: float) -> float:
    """omega(Phi_t) = 1/2 tr(phi D_t)."""
    return 0.5 * float(np.sum(system.fluxes[name] * propagate(system, t)))


def equilibrium_gk(system: GaussianSystem, t: float, tol: float = 1e-10) -> np.ndarray:
    """L_t[j, k] = 1/2 int_{-t}^{t} omega(Phi^k Phi^j_s)(1 - |s|/t) ds at X = 0.

    For centred Gaussian omega, Cov(x.A x/2, x.B x/2) = tr(A D B D)/2.
    """
    D = np.linalg.inv(system.reference_form)
    names = list(system.fluxes)
    phis = [system.fluxes[k] for k in names]
    nc = len(phis)
    out = np.zeros((nc, nc))
    for j in range(nc):
        for k in range(nc):
            def c(s, j=j, k=k):
                E = flow_matrix(system, s)
                return 0.5 * np.sum((phis[k] @ D) * (E.T @ phis[j] @ E @ D).T) * (1 - abs(s) / t)
            out[j, k] = 0.5 * (adaptive_quad(c, -t, 0.0, tol) + adaptive_quad(c, 0.0, t, tol))
    return out


def finite_time_transport(system: GaussianSystem, t: float, h: float = 1e-3,
                          tol: float = 1e-10) -> TransportReport:
    """Finite-time kinetic coefficients of an equilibrium system (X = 0).

    L_t = -(1/t) d_X d_Y g_t(0, 0) from finite differences; D_t = (1/t) d_Y d_Y g_t
    is the covariance of the time-integrated fluxes per unit time; gk_sum is
    the correlation quadrature of ``equilibrium_gk``.
    """
    sd = mixed_second_derivative(lambda X, Y: ges_finite(system, Y, t, X),
                                 np.zeros(len(system.control_forms)),
                                 np.zeros(len(system.control_forms)), h)
    L = -sd.mixed / t
    D = sd.yy / t
    gk = equilibrium_gk(system, t, tol)
    return TransportReport(L, D, gk, float(np.max(np.abs(L - L.T))),
                           float(np.max(np.abs(D - 2 * L))),
                           {"richardson_gap": sd.richardson_gap,
                            "fd_vs_gk": float(np.max(np.abs(L - gk)))})


def sample_flux_integrals(system: GaussianSystem, t: float, count: int, seed: int,
                          chunk: int = 100_000) -> SampleSet:
    """Exact Gaussian trajectories: x ~ N(0, D0) via a symmetric square root,
    int_0^t Phi^j = -1/2 x.(E^T K_j E - K_j) x per reservoir."""
    rng = np.random.default_rng(seed)
    w, V = np.linalg.eigh(system.D0)
    root = (V * np.sqrt(w)) @ V.T
    E = flow_matrix(system, t)
    B = [-0.5 * (E.T @ K @ E - K) for K in system.control_forms]
    out = np.empty((count, len(B)))
    done = 0
    while done < count:
        m = min(chunk, count - done)
        x = rng.standard_normal((m, system.dim)) @ root
        for j, Bj in enumerate(B):
            out[done:done + m, j] = np.einsum("ij,ij->i", x @ Bj, x)
        done += m
    S = out @ system.X
    return SampleSet(system.meta.get("model", "gaussian"), t, seed, S, out)


def strip_along_ray(system: GaussianSystem, t: float, direction, r_max: float = 10.0,
                    tol: float = 1e-10) -> float:
    """Largest r with g_t(X, r*direction) finite, by bisection."""
    direction = np.asarray(direction, float)
    if ges_finite(system, r_max * direction, t).is_finite:
        return r_max
    lo, hi = 0.0, r_max
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ges_finite(system, mid * direction, t).is_finite:
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# Thermodynamic limit


@dataclass
class ThermoLimit:
    g: float
    flux_L: float
    sigma_plus: float
    rate: RateFunction


def thermo_g(beta: float, X, Y) -> float:
    a, b = beta - X[0], beta - X[1]
    d = Y[1] - Y[0]
    if not (-b < d < a):
        raise OutsideStrip(f"Y_R - Y_L = {d} outside ]{-b}, {a}[")
    return -KAPPA * math.log((a - d) * (b + d) / (a * b))


def thermo_rate(beta: float, X, s_grid) -> RateFunction:
    """Rate function of the left flux, parametrised by s = (kappa/beta0) sh(theta)."""
    beta0 = beta - 0.5 * (X[0] + X[1])
    dl = 0.5 * (X[0] - X[1])
    s_grid = np.asarray(s_grid, dtype=float)
    th = np.arcsinh(beta0 * s_grid / KAPPA)
    vals = -KAPPA * (2 * np.sinh(th / 2) ** 2 - (dl / beta0) * np.sinh(th)
                     - np.log((1 - dl**2 / beta0**2) * np.cosh(th / 2) ** 2))
    TL, TR = 1 / (beta - X[0]), 1 / (beta - X[1])
    return RateFunction(s_grid, vals, np.zeros(len(s_grid), np.int8), KAPPA * (TL - TR),
                        (float(s_grid.min()), float(s_grid.max())), {"model": "harmonic-chain-limit"})


def chain_thermo_limit(beta: float, X, Y, s_grid=None) -> ThermoLimit:
    X = np.asarray(X, float)
    if max(X) >= beta:
        raise OutsideStrip("need max(X) < beta")
    TL, TR = 1 / (beta - X[0]), 1 / (beta - X[1])
    g = thermo_g(beta, X, Y)
    s_grid = np.linspace(-0.5, 0.5, 101) if s_grid is None else s_grid
    return ThermoLimit(g, KAPPA * (TL - TR), KAPPA * (TL - TR) ** 2 / (TL * TR),
                       thermo_rate(beta, X, s_grid))
