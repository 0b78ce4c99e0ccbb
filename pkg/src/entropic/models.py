"""Exactly solvable models: thermostated microcanonical ideal gas, Bernoulli
shift (baker map) and the half-line dilation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    FunctionalKind,
    GeneratingFunction,
    RateFunction,
    SymmetryReport,
    adaptive_quad,
    check_symmetry,
)
from .errors import OffShell, ParameterOutOfRange
from .sampler import SampleSet


def logch(x):
    """log cosh with full relative precision for small and large |x|."""
    a = np.abs(x)
    small = a < 1
    # log ch x = log1p(2 sh^2(x/2)) avoids the cancellation near 0.
    near = np.log1p(2 * np.sinh(np.where(small, a, 0.0) / 2) ** 2)
    far = a + np.log1p(np.exp(-2 * a)) - math.log(2)
    return np.where(small, near, far)


# ---------------------------------------------------------------------------
# Ideal gas


@dataclass(frozen=True)
class IdealGasModel:
    N: int
    F: float
    eps: float

    def __post_init__(self):
        if self.N < 2 or self.eps <= 0:
            raise ParameterOutOfRange("need N >= 2 and eps > 0")

    @property
    def mu(self) -> float:
        return self.F / math.sqrt(self.eps)


def gas_xi(model: IdealGasModel, L) -> np.ndarray:
    """Rapidity variable of a phase point (or of each row of a batch)."""
    L = np.asarray(L, dtype=float)
    return np.arctanh(L.mean(axis=-1) / math.sqrt(model.eps))


def _check_shell(model, L):
    u = np.mean(np.asarray(L, dtype=float) ** 2, axis=-1)
    if np.any(np.abs(u - model.eps) > 1e-10 * max(1.0, model.eps)):
        raise OffShell(f"(1/N) sum L^2 = {u} differs from eps = {model.eps}")


def gas_flow(model: IdealGasModel, L0, theta0, t: float):
    """Closed-form solution of the thermostated flow; returns (L_t, theta_t)."""
    L0 = np.asarray(L0, dtype=float)
    theta0 = np.asarray(theta0, dtype=float)
    _check_shell(model, L0)
    if model.F == 0:
        return L0.copy(), np.mod(theta0 + t * L0, 2 * math.pi)
    se = math.sqrt(model.eps)
    xi0 = float(gas_xi(model, L0))
    d = model.mu * t
    xit = xi0 + d
    amp = L0 * math.cosh(xi0) - se * math.sinh(xi0)
    Lt = amp / math.cosh(xit) + se * math.tanh(xit)
    # theta_t - theta_0 = int_0^t L_s ds = amp * I_sech + sqrt(eps) * I_tanh.
    i_sech, i_tanh = _drift_integrals(xi0, d, t)
    theta = theta0 + amp * i_sech + se * i_tanh
    return Lt, np.mod(theta, 2 * math.pi)


def _drift_integrals(xi0: float, d: float, t: float):
    """int_0^t sech(xi0 + d s/t) ds and int_0^t th(xi0 + d s/t) ds.

    For |d| < 1 the differences of the antiderivatives (Gudermannian and
    log ch) are rewritten so no cancellation occurs as d -> 0.
    """
    if d == 0:
        return t / math.cosh(xi0), t * math.tanh(xi0)
    xit = xi0 + d
    if abs(d) < 1:
        # atan x - atan y = atan((x - y) / (1 + x y)) when x y > -1.
        x, y = math.sinh(xit), math.sinh(xi0)
        gd = math.atan(2 * math.cosh(xi0 + d / 2) * math.sinh(d / 2) / (1 + x * y))
        dlc = math.log1p(2 * math.sinh(d / 2) ** 2 + math.tanh(xi0) * math.sinh(d))
    else:
        gd = math.atan(math.sinh(xit)) - math.atan(math.sinh(xi0))
        dlc = float(logch(xit) - logch(xi0))
    return t * gd / d, t * dlc / d


def gas_entropy_functional(model: IdealGasModel, L0, t: float) -> float:
    """Integrated entropy production over [0, t] from phase point L0."""
    _check_shell(model, L0)
    xi0 = float(gas_xi(model, L0))
    return float((model.N - 1) * (logch(xi0 + model.mu * t) - logch(xi0)))


def gas_log_prefactor(N: int) -> float:
    """log of the normalisation of the xi-density (ch xi)^-(N-1)."""
    return math.lgamma(N / 2) - 0.5 * math.log(math.pi) - math.lgamma((N - 1) / 2)


def gas_e_t(model: IdealGasModel, alpha: float, t: float, tol: float = 1e-10) -> float:
    """Finite-time ES functional, by quadrature over the rapidity variable."""
    k = model.N - 1
    a, b = k * (1 - alpha), k * alpha
    s = model.mu * t

    def logf(x):
        return -a * logch(x) - b * logch(x + s)

    lo_c, hi_c = min(0.0, -s), max(0.0, -s)
    probe = np.linspace(lo_c - 5, hi_c + 5, 2001)
    m = float(np.max(logf(probe)))
    # |log ch x - |x|| <= log 2 gives an exponential envelope of rate N-1.
    logc = (max(a, 0) + max(b, 0)) * math.log(2) - m - math.log(k)

    def tail(lo, hi):
        return math.exp(logc - k * hi - b * s) + math.exp(logc + k * lo + b * s)

    val = adaptive_quad(lambda x: math.exp(logf(x) - m), -math.inf, math.inf, tol,
                        tail=tail, points=(lo_c, hi_c))
    return gas_log_prefactor(model.N) + m + math.log(val)


@dataclass
class GasAsymptotics:
    sigma_plus: float
    e: GeneratingFunction
    e_plus: GeneratingFunction
    rate: RateFunction
    es_symmetry: SymmetryReport
    gc_symmetry: SymmetryReport
    regular: bool      # e == e_plus on the whole grid


def gas_asymptotics(model: IdealGasModel, alpha_grid=None, s_grid=None,
                    tol: float = 1e-12) -> GasAsymptotics:
    sp = (model.N - 1) * abs(model.F) / math.sqrt(model.eps)
    alpha_grid = np.linspace(-1, 2, 61) if alpha_grid is None else np.asarray(alpha_grid, float)

    def e(a):
        return -sp * (0.5 - abs(a - 0.5))

    def e_plus(a):
        return -a * sp

    meta = {"model": "ideal-gas"}
    E = GeneratingFunction.tabulate(FunctionalKind.ES_LIMIT, alpha_grid, e, meta=meta)
    Ep = GeneratingFunction.tabulate(FunctionalKind.GC_LIMIT, alpha_grid, e_plus, meta=meta)
    if s_grid is None:
        s_grid = np.linspace(-1.5 * sp, 1.5 * sp, 61) if sp else np.array([0.0])
    s_grid = np.asarray(s_grid, float)
    inside = np.abs(s_grid) <= sp
    rate = RateFunction(s_grid, np.where(inside, 0.5 * (s_grid - sp), np.nan),
                        np.where(inside, 0, -1).astype(np.int8), sp, (-sp, sp), meta)
    es = check_symmetry(E, tol=tol)
    gc = check_symmetry(Ep, tol=tol)
    regular = bool(np.allclose(E.values, Ep.values, atol=tol))
    return GasAsymptotics(sp, E, Ep, rate, es, gc, regular)


def gas_sample(model: IdealGasModel, count: int, seed: int, t: float = 0.0) -> SampleSet:
    """Microcanonical phase points; entropy records are integrated over [0, t]."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((count, model.N))
    L = g * (math.sqrt(model.N * model.eps) / np.linalg.norm(g, axis=1))[:, None]
    theta = rng.uniform(0, 2 * math.pi, (count, model.N))
    xi0 = gas_xi(model, L)
    S = (model.N - 1) * (logch(xi0 + model.mu * t) - logch(xi0))
    if model.F != 0:
        flux = S / model.F
    else:
        flux = t * (model.N - 1) * np.tanh(xi0) / math.sqrt(model.eps)
    return SampleSet("ideal-gas", t, seed, S, flux[:, None], {"L": L, "theta": theta, "xi": xi0})


# ---------------------------------------------------------------------------
# Bernoulli shift


@dataclass(frozen=True)
class BernoulliModel:
    """Two-sided Bernoulli shift with past marginal p and future marginal q.

    The baker map is isomorphic (mod 0) to this shift, so ``BakerMap`` is an
    alias rather than a separate implementation.
    """

    p: float
    q: float

    def __post_init__(self):
        if not (0 < self.p < 1 and 0 < self.q < 1):
            raise ParameterOutOfRange("p and q must lie in (0, 1)")

    @property
    def tri(self) -> bool:
        return abs(self.q - (1 - self.p)) <= 1e-12


BakerMap = BernoulliModel


def bernoulli_e(model: BernoulliModel, alpha: float) -> float:
    p, q = model.p, model.q
    return float(np.logaddexp((1 - alpha) * math.log(p) + alpha * math.log(q),
                              (1 - alpha) * math.log1p(-p) + alpha * math.log1p(-q)))


def bernoulli_sigma_plus(model: BernoulliModel) -> float:
    p, q = model.p, model.q
    return q * math.log(q / p) + (1 - q) * math.log((1 - q) / (1 - p))


def bernoulli_functionals(model: BernoulliModel, alpha_grid):
    meta = {"model": "bernoulli", "p": model.p, "q": model.q}
    e = GeneratingFunction.tabulate(FunctionalKind.ES_LIMIT, alpha_grid,
                                    lambda a: bernoulli_e(model, a), meta=meta)
    e_plus = GeneratingFunction.tabulate(FunctionalKind.GC_LIMIT, alpha_grid,
                                         lambda a: bernoulli_e(model, 1 - a), meta=meta)
    return e, e_plus, bernoulli_sigma_plus(model)


def bernoulli_sample(model: BernoulliModel, n: int, count: int, seed: int) -> SampleSet:
    """Entropy sums over n future coordinates, each drawn from the q-marginal."""
    rng = np.random.default_rng(seed)
    ones = rng.binomial(n, model.q, count)
    s1 = math.log(model.q / model.p)
    s0 = math.log((1 - model.q) / (1 - model.p))
    S = ones * s1 + (n - ones) * s0
    return SampleSet("bernoulli", n, seed, S, ones[:, None].astype(float))


# ---------------------------------------------------------------------------
# Dilation of the half-line


@dataclass(frozen=True)
class DilationModel:
    """x -> e^{gamma t} x on [0, inf] with the weight (2/pi)/(1+x^2).

    Everything is computed in xi = log x, where the weight becomes
    sech(xi)/pi, the flow a translation and the flux th(xi).
    """

    gamma: float


def dilation_e(model: DilationModel, alpha: float) -> float:
    g = abs(model.gamma)
    return -alpha * g if alpha <= 0.5 else -(1 - alpha) * g


def dilation_e_plus(model: DilationModel, alpha: float) -> float:
    return -alpha * abs(model.gamma)


def dilation_flux_mean(model: DilationModel, t: float) -> float:
    return math.tanh(model.gamma * t / 2)


def dilation_mean_flux_average(gamma: float, t: float) -> float:
    """(1/t) int_0^t th(gamma s / 2) ds."""
    if gamma == 0:
        return 0.0
    return 2 * float(logch(gamma * t / 2)) / (gamma * t)


def dilation_kinetic_coefficient(t: float, h: float = 1e-3) -> float:
    """d/dgamma at gamma = 0 of the time-averaged mean flux.

    Central difference of an odd function with Richardson extrapolation;
    truncation error is O(h^4 t^5).
    """
    def d(step):
        return (dilation_mean_flux_average(step, t) - dilation_mean_flux_average(-step, t)) / (2 * step)
    return (4 * d(h / 2) - d(h)) / 3


def dilation_functionals(model: DilationModel, alpha_grid, t: float):
    """Returns (e, e_plus, omega(Phi_t), L_t)."""
    meta = {"model": "dilation", "gamma": model.gamma}
    e = GeneratingFunction.tabulate(FunctionalKind.ES_LIMIT, alpha_grid,
                                    lambda a: dilation_e(model, a), meta=meta)
    e_plus = GeneratingFunction.tabulate(FunctionalKind.GC_LIMIT, alpha_grid,
                                         lambda a: dilation_e_plus(model, a), meta=meta)
    return e, e_plus, dilation_flux_mean(model, t), dilation_kinetic_coefficient(t)


def dilation_sample(model: DilationModel, t: float, count: int, seed: int) -> SampleSet:
    """Entropy over [0, t] and the instantaneous flux Phi_t per sample."""
    rng = np.random.default_rng(seed)
    xi = np.log(np.abs(rng.standard_cauchy(count)))
    S = logch(xi + model.gamma * t) - logch(xi)
    return SampleSet("dilation", t, seed, S, np.tanh(xi + model.gamma * t)[:, None], {"xi": xi})
