"""Monte Carlo estimators: empirical generating functions with bootstrap
confidence intervals, fluctuation-identity histograms, finite-time
Green-Kubo sums and empirical rate functions.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .core import FunctionalKind, GeneratingFunction, TransportReport, fmt
from .errors import InsufficientSymmetricMass


@dataclass
class SampleSet:
    """Per-trajectory entropy and flux functionals of one ensemble."""

    model: str
    horizon: float
    seed: int
    entropy: np.ndarray                 # S_t sigma per sample
    fluxes: np.ndarray | None = None    # (count, channels) flux integrals
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.entropy = np.asarray(self.entropy, dtype=float)
        if self.fluxes is not None:
            self.fluxes = np.asarray(self.fluxes, dtype=float).reshape(len(self.entropy), -1)
        if not np.all(np.isfinite(self.entropy)):
            raise ValueError("non-finite entropy record")

    @property
    def count(self) -> int:
        return len(self.entropy)

    def to_csv(self, path) -> None:
        nch = 0 if self.fluxes is None else self.fluxes.shape[1]
        with open(path, "w", newline="") as fh:
            fh.write(f"# model={self.model} horizon={fmt(self.horizon)} seed={self.seed}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sample_index", "entropy"] + [f"flux{k}" for k in range(nch)])
            for i in range(self.count):
                row = [i, fmt(self.entropy[i])]
                if nch:
                    row += [fmt(x) for x in self.fluxes[i]]
                w.writerow(row)


@dataclass
class EstimateWithCI:
    point: float
    lo: float
    hi: float
    level: float
    ess: float
    unstable_tail: bool = False

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi


def log_mean_exp_ci(w_log: np.ndarray, level: float = 0.95, resamples: int = 1000,
                    seed: int = 0, groups: int = 10_000) -> EstimateWithCI:
    """log of the sample mean of exp(w_log), with a bootstrap percentile CI.

    Samples are split into ``groups`` fixed blocks whose log-sum-exp values
    are resampled; for independent draws this is equivalent to resampling
    individual records at a fraction of the cost.
    """
    w_log = np.asarray(w_log, dtype=float)
    n = len(w_log)
    point = float(logsumexp(w_log) - math.log(n))
    if np.all(w_log == w_log[0]):
        return EstimateWithCI(point, point, point, level, float(n))
    wn = np.exp(w_log - w_log.max())
    ess = float(wn.sum() ** 2 / np.sum(wn**2))
    k = max(1, int(math.ceil(0.001 * n)))
    top = np.partition(wn, n - k)[n - k:].sum()
    unstable = bool(top > 0.5 * wn.sum())

    g = min(groups, n)
    labels = np.arange(n) % g
    glse = np.full(g, -np.inf)
    np.logaddexp.at(glse, labels, w_log)
    gcount = np.bincount(labels, minlength=g).astype(float)
    rng = np.random.default_rng(seed)
    boot = np.empty(resamples)
    for r in range(resamples):
        pick = rng.integers(0, g, g)
        boot[r] = logsumexp(glse[pick]) - math.log(gcount[pick].sum())
    a = (1 - level) / 2
    lo, hi = np.quantile(boot, [a, 1 - a])
    return EstimateWithCI(point, float(min(lo, point)), float(max(hi, point)), level, ess, unstable)


def estimate_generating(samples: SampleSet, alpha_grid, level: float = 0.95,
                        resamples: int = 1000, seed: int = 0,
                        observable: np.ndarray | None = None):
    """Empirical e_t(alpha) = log mean exp(-alpha * S) with per-point CIs.

    ``observable`` replaces the entropy records (e.g. Y . flux integrals with
    alpha = 1). Returns (GeneratingFunction, list of EstimateWithCI).
    """
    if samples.count < 1000:
        raise ValueError("need at least 1000 samples")
    S = samples.entropy if observable is None else np.asarray(observable, dtype=float)
    grid = np.asarray(alpha_grid, dtype=float)
    ests = [log_mean_exp_ci(-a * S, level, resamples, seed) for a in grid]
    gf = GeneratingFunction.from_values(
        FunctionalKind.ES_FINITE, grid, [e.point for e in ests], samples.horizon,
        {"model": samples.model, "seed": samples.seed})
    return gf, ests


@dataclass
class SlopeReport:
    slope: float
    intercept: float
    expected: float
    rel_deviation: float
    pairs: int
    skipped: bool = False
    note: str = ""


def symmetric_bin_width(values: np.ndarray) -> float:
    """Freedman-Diaconis width computed on |values|."""
    a = np.abs(values)
    q75, q25 = np.percentile(a, [75, 25])
    return 2 * (q75 - q25) * len(a) ** (-1 / 3)


def es_identity_check(samples: SampleSet, t: float, width: float | None = None,
                      min_count: int = 10, min_pairs: int = 5) -> SlopeReport:
    """Regress log(count(-bin)/count(+bin)) on s for the time-averaged
    entropy s = S/t; the fluctuation identity predicts slope -t.

    Bins are mirror images about 0 (edges at +-(k + 1/2) w) so the central
    bin is excluded. Each pair is placed at the pooled mean of |s| inside it.
    """
    s = samples.entropy / t
    if np.all(s == 0):
        return SlopeReport(math.nan, math.nan, -t, math.nan, 0, True,
                           "all mass at s = 0 (equilibrium); check skipped")
    w = symmetric_bin_width(s) if width is None else width
    if w <= 0:
        w = np.ptp(s) / 100
    k = np.floor(np.abs(s) / w + 0.5).astype(np.int64)
    pos, neg = s > 0, s < 0
    kmax = int(k.max())
    cp = np.bincount(k[pos], minlength=kmax + 1)
    cn = np.bincount(k[neg], minlength=kmax + 1)
    sp = np.bincount(k[pos], weights=s[pos], minlength=kmax + 1)
    sn = np.bincount(k[neg], weights=-s[neg], minlength=kmax + 1)
    ok = (cp >= min_count) & (cn >= min_count)
    ok[0] = False
    if ok.sum() < min_pairs:
        raise InsufficientSymmetricMass(f"only {int(ok.sum())} populated bin pairs")
    x = (sp[ok] + sn[ok]) / (cp[ok] + cn[ok])
    y = np.log(cn[ok] / cp[ok])
    wt = 1.0 / (1.0 / cn[ok] + 1.0 / cp[ok])
    A = np.column_stack([x, np.ones_like(x)]) * np.sqrt(wt)[:, None]
    (slope, icpt), *_ = np.linalg.lstsq(A, y * np.sqrt(wt), rcond=None)
    return SlopeReport(float(slope), float(icpt), -t, float(abs(slope + t) / t), int(ok.sum()))


def finite_gk(correlator: Callable[[int], np.ndarray], t: int) -> TransportReport:
    """Discrete-time finite-horizon Green-Kubo sums.

    ``correlator(n)`` returns the matrix C[j, k] = omega(Phi^k Phi^j_n) for
    integer lags n (negative included). Returns L_t = 1/2 sum C(n)(1-|n|/t)
    and D_t = sum C(n)(1-|n|/t) over |n| <= t.
    """
    t = int(t)
    C0 = np.atleast_2d(np.asarray(correlator(0), dtype=float))
    D = C0.copy()
    for n in range(1, t + 1):
        wgt = 1.0 - n / t
        if wgt == 0:
            break
        D += wgt * (np.atleast_2d(correlator(n)) + np.atleast_2d(correlator(-n)))
    L = 0.5 * D
    return TransportReport(L, D, L.copy(), float(np.max(np.abs(L - L.T))),
                           float(np.max(np.abs(D - 2 * L))), {"t": t})


@dataclass
class EmpiricalRate:
    centers: np.ndarray
    counts: np.ndarray
    values: np.ndarray      # (1/horizon) log(count / total)
    errors: np.ndarray      # one-sigma statistical error of values
    total: int


def ldp_empirical(samples: SampleSet, horizon: float, s_bins) -> EmpiricalRate:
    """Empirical rate data from binned s = S/horizon; empty bins are dropped."""
    s = samples.entropy / horizon
    edges = np.asarray(s_bins, dtype=float)
    counts, _ = np.histogram(s, edges)
    centers = 0.5 * (edges[1:] + edges[:-1])
    keep = counts > 0
    c = counts[keep].astype(float)
    n = samples.count
    vals = np.log(c / n) / horizon
    errs = np.sqrt((1 - c / n) / c) / horizon
    return EmpiricalRate(centers[keep], counts[keep], vals, errs, n)
