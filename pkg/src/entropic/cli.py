"""Config-driven experiment runner.

    entropic <kind> CONFIG [--seed N] [--out DIR] [--tol NAME=VALUE ...] [--threads N]
    entropic validate CONFIG
    entropic schema KIND

Each run writes ``manifest.json``, one or more CSV tables and ``verdict.json``
into the output directory. Exit status is 0 when every check passes, 1 when a
check fails and 2 when the configuration is invalid.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import platform
import sys
from pathlib import Path

from .errors import ConfigInvalid

KINDS = ("gas", "bernoulli", "dilation", "markov", "markov-family", "chain", "gaussian",
         "thermo-limit")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_count = {"type": "integer", "minimum": 0}
_grid = {
    "oneOf": [
        {"type": "array", "items": _num, "minItems": 1},
        {"type": "object", "additionalProperties": False, "required": ["start", "stop", "num"],
         "properties": {"start": _num, "stop": _num, "num": {"type": "integer", "minimum": 1}}},
    ]
}
_pair = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_common = {
    "kind": {"enum": list(KINDS)},
    "seed": {"type": "integer", "minimum": 0},
    "output": {"type": "string"},
    "tolerances": {"type": "object", "additionalProperties": _pos},
}


def _schema(required, props):
    return {"type": "object", "additionalProperties": False, "required": ["kind", *required],
            "properties": {**_common, **props}}


SCHEMAS = {
    "gas": _schema(["N", "eps", "F"], {
        "N": {"type": "integer", "minimum": 2}, "eps": _pos, "F": _num,
        "alpha": _grid, "t": _grid, "t_long": _pos, "samples": _count, "quad_tol": _pos}),
    "bernoulli": _schema(["p", "q"], {
        "p": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "q": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "alpha": _grid, "n": {"type": "integer", "minimum": 1}, "samples": _count}),
    "dilation": _schema(["gamma"], {
        "gamma": _num, "alpha": _grid, "t": _pos, "samples": _count}),
    "markov": _schema([], {
        "P": {"type": "array", "items": {"type": "array", "items": _pos}},
        "builtin": {"enum": ["rotor"]},
        "q": {"type": "array", "items": _pos},
        "alpha": _grid, "n": {"type": "integer", "minimum": 1}, "samples": _count,
        "resonance_alpha": _grid}),
    "markov-family": _schema(["family"], {
        "family": {"enum": ["tilted-symmetric-kernel"]},
        "weights": {"type": "array", "items": {"type": "array", "items": _pos}},
        "fd_step": _pos, "X_points": {"type": "array", "items": _pair},
        "Y_points": {"type": "array", "items": _pair}}),
    "chain": _schema(["n", "m", "beta", "X"], {
        "n": {"type": "integer", "minimum": 1}, "m": _count, "beta": _pos, "X": _pair,
        "Y": {"type": "array", "items": _pair, "minItems": 1}, "t": _grid,
        "samples": _count, "probe_t": _pos, "probes": {"type": "array", "items": _pair}}),
    "gaussian": _schema(["n", "m", "beta", "X"], {
        "n": {"type": "integer", "minimum": 1}, "m": _count, "beta": _pos, "X": _pair,
        "window": _pair, "slope_window": _pair, "alpha_points": {"type": "integer", "minimum": 3},
        "balance_t": _pos}),
    "thermo-limit": _schema(["n", "m", "beta", "X"], {
        "n": {"type": "integer", "minimum": 1}, "m": _count, "beta": _pos, "X": _pair,
        "window": _pair, "t_g": _pos, "Y": {"type": "array", "items": _pair, "minItems": 1},
        "s": _grid}),
}

DEFAULT_TOL = {
    "symmetry": 1e-8, "kawasaki": 1e-10, "asymptotic": 0.05, "slope_rel": 0.03,
    "bernoulli_symmetry": 1e-12, "control_gap": 1e-3, "derivative": 1e-6,
    "enumeration": 1e-10, "reference": 1e-6, "resonance": 1e-10, "onsager": 1e-6,
    "fd_gk": 1e-4, "einstein": 1e-4, "ggc": 1e-10, "invariant": 1e-9, "flux_rel": 0.05,
    "g_rel": 0.03, "limit": 1e-3, "balance": 1e-7, "kinetic": 1e-10, "mc_se": 3.0,
}


# ---------------------------------------------------------------------------
# Validation


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read config: {exc}") from None


def validate(config: dict) -> list[str]:
    """Schema and range findings; an empty list means the config is runnable."""
    import jsonschema

    if not isinstance(config, dict) or config.get("kind") not in SCHEMAS:
        return [f"unknown or missing kind; expected one of {', '.join(KINDS)}"]
    validator = jsonschema.Draft202012Validator(SCHEMAS[config["kind"]])
    findings = [f"{'/'.join(map(str, e.path)) or '<root>'}: {e.message}"
                for e in sorted(validator.iter_errors(config), key=lambda e: list(e.path))]
    for key in ("alpha", "t", "s", "resonance_alpha"):
        if isinstance(config.get(key), (list, dict)) and not _expand(config[key]):
            findings.append(f"{key}: grid is empty")
    if findings:
        return findings
    kind = config["kind"]
    if kind in ("chain", "gaussian", "thermo-limit"):
        if not config["n"] > config["m"]:
            findings.append("n: must exceed m")
        else:
            from .gaussian import ChainSpec, chain_precision_floor

            lam = chain_precision_floor(ChainSpec(config["n"], config["m"], config["beta"],
                                                  tuple(config["X"])))
            if lam <= 0:
                findings.append(f"NotInOBeta: beta*h - k(X) has eigenvalue {lam:.17g}")
    if kind == "markov":
        if ("P" in config) == ("builtin" in config):
            findings.append("markov: give exactly one of P or builtin")
        elif "P" in config:
            P = config["P"]
            if any(len(r) != len(P) for r in P) or len(P) < 2:
                findings.append("P: must be square with size >= 2")
            elif any(abs(sum(r) - 1) > 1e-12 for r in P):
                findings.append("P: rows must sum to 1")
        if "q" in config and abs(sum(config["q"]) - 1) > 1e-12:
            findings.append("q: must sum to 1")
    return findings


def _expand(grid):
    if isinstance(grid, dict):
        import numpy as np

        return list(np.linspace(grid["start"], grid["stop"], grid["num"]))
    return list(grid)


# ---------------------------------------------------------------------------
# Bundle helpers


class Bundle:
    def __init__(self, tol: dict):
        self.tol = tol
        self.tables: dict[str, tuple[list, list]] = {}
        self.checks: list[dict] = []

    def table(self, name, header, rows):
        self.tables[name] = (header, rows)

    def check(self, name, anchor, residual, tol_key, *, relation="<=", info=False):
        """Record a check; relation '<=' passes when residual <= tol, '>' when above."""
        tol = self.tol[tol_key]
        residual = float(residual)
        ok = residual <= tol if relation == "<=" else residual > tol
        self.checks.append({"name": name, "anchor": anchor, "passed": bool(ok),
                            "residual": _json_num(residual), "tolerance": tol,
                            "relation": relation, "mandatory": not info})

    def verdict(self) -> bool:
        mandatory = [c for c in self.checks if c["mandatory"]]
        return all(c["passed"] for c in mandatory)


def _json_num(x):
    return x if math.isfinite(x) else str(x)


def _fmt(x):
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return format(float(x), ".17g")


def write_bundle(out: Path, config: dict, seed: int, bundle: Bundle) -> bool:
    import numpy
    import scipy

    from . import __version__

    out.mkdir(parents=True, exist_ok=True)
    manifest = {"config": config, "seed": seed,
                "versions": {"entropic": __version__, "python": platform.python_version(),
                             "numpy": numpy.__version__, "scipy": scipy.__version__},
                "tables": sorted(bundle.tables)}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    for name, (header, rows) in bundle.tables.items():
        lines = [",".join(header)] + [",".join(_fmt(v) for v in row) for row in rows]
        (out / f"{name}.csv").write_text("\n".join(lines) + "\n")
    passed = bundle.verdict()
    verdict = {"kind": config["kind"], "seed": seed, "passed": passed, "checks": bundle.checks}
    (out / "verdict.json").write_text(json.dumps(verdict, indent=2) + "\n")
    return passed


# ---------------------------------------------------------------------------
# Experiments


def run_gas(cfg, seed, b: Bundle):
    import numpy as np

    from .core import FunctionalKind, GeneratingFunction, check_symmetry
    from .models import IdealGasModel, gas_asymptotics, gas_e_t, gas_sample
    from .sampler import es_identity_check

    model = IdealGasModel(cfg["N"], cfg["F"], cfg["eps"])
    alphas = np.asarray(_expand(cfg.get("alpha", {"start": -1, "stop": 2, "num": 61})))
    ts = _expand(cfg.get("t", [1, 5, 20]))
    qtol = cfg.get("quad_tol", 1e-10)
    rows, worst, kaw = [], 0.0, 0.0
    for t in ts:
        gf = GeneratingFunction.tabulate(FunctionalKind.ES_FINITE, alphas,
                                         lambda a: gas_e_t(model, a, t, qtol), horizon=t)
        rows += [[t, a, v] for a, v in zip(alphas, gf.values)]
        worst = max(worst, check_symmetry(gf, tol=b.tol["symmetry"]).max_residual)
        kaw = max(kaw, abs(gas_e_t(model, 0.0, t, qtol)), abs(gas_e_t(model, 1.0, t, qtol)))
    b.table("e_t", ["t", "alpha", "e_t"], rows)
    b.check("finite-time ES symmetry", "e_t(alpha) = e_t(1-alpha)", worst, "symmetry")
    b.check("Kawasaki identity", "e_t(0) = e_t(1) = 0", kaw, "kawasaki")

    asym = gas_asymptotics(model, alphas)
    b.table("asymptotics", ["alpha", "e", "e_plus"],
            [[a, e, ep] for a, e, ep in zip(alphas, asym.e.values, asym.e_plus.values)])
    t_long = cfg.get("t_long", 200.0)
    dev = max(abs(gas_e_t(model, a, t_long, qtol) / t_long - (-asym.sigma_plus * (0.5 - abs(a - 0.5))))
              for a in (0.1, 0.25, 0.4))
    b.check("long-time limit of e_t / t", "e(alpha) = -sigma_+ (1/2 - |alpha - 1/2|)", dev, "asymptotic")
    if model.F != 0:
        b.check("GC symmetry of e_plus fails", "e_+(alpha) = -alpha sigma_+",
                asym.gc_symmetry.max_residual, "control_gap", relation=">")
    n = cfg.get("samples", 0)
    if n and model.F != 0:
        t = ts[0]
        rep = es_identity_check(gas_sample(model, n, seed, t), t)
        b.check("ES identity slope", "P(-s)/P(s) = exp(-t s)", rep.rel_deviation, "slope_rel")


def run_bernoulli(cfg, seed, b: Bundle):
    import numpy as np

    from .core import check_symmetry
    from .models import BernoulliModel, bernoulli_e, bernoulli_functionals, bernoulli_sample
    from .sampler import es_identity_check

    model = BernoulliModel(cfg["p"], cfg["q"])
    alphas = np.asarray(_expand(cfg.get("alpha", {"start": -1, "stop": 2, "num": 61})))
    e, e_plus, sp = bernoulli_functionals(model, alphas)
    b.table("functionals", ["alpha", "e", "e_plus"],
            [[a, x, y] for a, x, y in zip(alphas, e.values, e_plus.values)])
    b.check("Kawasaki identity", "e(0) = e(1) = 0",
            max(abs(bernoulli_e(model, 0.0)), abs(bernoulli_e(model, 1.0))), "bernoulli_symmetry")
    sym = check_symmetry(e, tol=b.tol["bernoulli_symmetry"])
    if model.tri:
        b.check("ES symmetry (time-reversal invariant case)", "e(alpha) = e(1-alpha)",
                sym.max_residual, "bernoulli_symmetry")
    else:
        b.check("ES symmetry broken without time reversal", "e(alpha) = e(1-alpha) iff q = 1-p",
                sym.max_residual, "control_gap", relation=">")
    h = 1e-5
    if model.tri:
        slope = (bernoulli_e(model, h) - bernoulli_e(model, -h)) / (2 * h)
        b.check("slope at zero equals minus the mean entropy production", "e'(0) = -sigma_+",
                abs(slope + sp), "derivative")
    # e_+(alpha) = e(1 - alpha), so e_+'(0) = -e'(1) = -sigma_+ without time reversal too.
    slope = -(bernoulli_e(model, 1 + h) - bernoulli_e(model, 1 - h)) / (2 * h)
    b.check("steady-state slope at zero equals minus the mean entropy production",
            "e_+'(0) = -sigma_+", abs(slope + sp), "derivative")
    n = cfg.get("samples", 0)
    if n and model.tri and model.p != model.q:
        horizon = cfg.get("n", 15)
        rep = es_identity_check(bernoulli_sample(model, horizon, n, seed), horizon)
        b.check("ES identity slope", "P(-s)/P(s) = exp(-n s)", rep.rel_deviation, "slope_rel")


def run_dilation(cfg, seed, b: Bundle):
    import numpy as np

    from .core import check_symmetry
    from .models import DilationModel, dilation_functionals, dilation_sample

    model = DilationModel(cfg["gamma"])
    alphas = np.asarray(_expand(cfg.get("alpha", {"start": -1, "stop": 2, "num": 61})))
    t = cfg.get("t", 1.0)
    e, e_plus, flux, Lt = dilation_functionals(model, alphas, t)
    b.table("functionals", ["alpha", "e", "e_plus"],
            [[a, x, y] for a, x, y in zip(alphas, e.values, e_plus.values)])
    b.check("ES symmetry", "e(alpha) = e(1-alpha)", check_symmetry(e).max_residual, "kawasaki")
    gc = check_symmetry(e_plus)
    exact = float(np.max(np.abs(model.gamma * (1 - 2 * alphas))))
    b.check("GC symmetry residual equals |gamma (1 - 2 alpha)|", "e_+(alpha) = -alpha |gamma|",
            abs(gc.max_residual - exact), "kawasaki")
    n = cfg.get("samples", 0)
    if n:
        ss = dilation_sample(model, t, n, seed)
        m = ss.fluxes[:, 0]
        z = abs(m.mean() - flux) / (m.std(ddof=1) / math.sqrt(n))
        b.check("Monte Carlo mean flux", "omega(Phi_t) = th(gamma t / 2)", z, "mc_se")
    b.check("finite-time kinetic coefficient", "L_t = t/2", abs(Lt - t / 2), "kinetic")
    b.table("transport", ["t", "flux_mean", "L_t"], [[t, flux, Lt]])


def run_markov(cfg, seed, b: Bundle):
    import numpy as np

    from .core import check_symmetry, legendre_conjugate
    from .markov import (MarkovChain, ep_rate, es_functional, es_value, finite_time_e_n,
                         locate_resonance, path_enumeration_e_n, rotor_chain, sample_paths)
    from .sampler import es_identity_check

    chain = rotor_chain() if cfg.get("builtin") == "rotor" else MarkovChain(np.array(cfg["P"]))
    q = np.asarray(cfg.get("q", np.full(chain.size, 1 / chain.size)), float)
    alphas = np.asarray(_expand(cfg.get("alpha", {"start": -0.5, "stop": 1.5, "num": 41})))
    sigma, ks, db = ep_rate(chain)
    e = es_functional(chain, alphas)
    b.table("e", ["alpha", "e"], [[a, v] for a, v in zip(alphas, e.values)])
    s = np.linspace(-sigma * 1.5 - 0.1, sigma * 1.5 + 0.1, 41)
    rate = legendre_conjugate(e, s)
    b.table("rate", ["s", "I", "finite"], [[x, v, int(st == 0)] for x, v, st in
                                           zip(rate.s_grid, rate.values, rate.states)])
    b.table("ep_rate", ["sigma_mean", "ks_entropy", "detailed_balance"], [[sigma, ks, int(db)]])
    b.check("ES symmetry", "e(alpha) = e(1-alpha)", check_symmetry(e).max_residual, "symmetry")
    h = 1e-5
    slope = (es_value(chain, h) - es_value(chain, -h)) / (2 * h)
    b.check("slope at zero equals minus the mean entropy production", "e'(0) = -sigma",
            abs(slope + sigma), "derivative")
    enum = max(abs(finite_time_e_n(chain, q, a, k) - path_enumeration_e_n(chain, q, a, k))
               for a in (0.0, 0.3, 0.5, 1.0) for k in range(1, 7 if chain.size <= 3 else 4))
    b.check("transfer matrix vs exhaustive path enumeration", "e_n = log q^T M^n 1", enum,
            "enumeration")
    n = 200
    lim = [finite_time_e_n(chain, qq, 0.3, n + 1) - finite_time_e_n(chain, qq, 0.3, n)
           for qq in (q, np.full(chain.size, 1 / chain.size))]
    b.check("reference-vector independence", "lim e_n / n independent of q",
            abs(lim[0] - lim[1]), "reference")
    worst = max(abs(locate_resonance(chain, a) - es_value(chain, a))
                for a in _expand(cfg.get("resonance_alpha", [0.3, 0.5, 0.8])))
    b.check("resolvent pole at the functional", "pole abscissa = e(alpha)", worst, "resonance")
    count = cfg.get("samples", 0)
    if count and not db:
        horizon = cfg.get("n", 20)
        rep = es_identity_check(sample_paths(chain, chain.stationary, horizon, count, seed), horizon)
        b.check("ES identity slope", "P(-s)/P(s) = exp(-n s)", rep.rel_deviation, "slope_rel")


def run_markov_family(cfg, seed, b: Bundle):
    import itertools

    from .markov import family_transport, tilted_symmetric_family

    fam = tilted_symmetric_family(cfg.get("weights"))
    Xs = cfg.get("X_points", [[0.0, 0.0], [0.3, -0.2], [-0.5, 0.4]])
    Ys = cfg.get("Y_points", [[0.0, 0.0], [0.1, 0.4], [-0.3, 0.2], [0.5, -0.5]])
    rep = family_transport(fam, cfg.get("fd_step", 1e-3), ggc_grid=list(itertools.product(Xs, Ys)))
    rows = []
    for j in range(fam.dim):
        for k in range(fam.dim):
            rows.append([j, k, rep.L[j, k], rep.extra["L_hessian"][j, k], rep.gk_sum[j, k], rep.D[j, k]])
    b.table("transport", ["j", "k", "L_mixed", "L_hessian", "L_green_kubo", "D"], rows)
    b.check("Onsager reciprocity", "L_jk = L_kj", rep.orr_residual, "onsager")
    b.check("finite differences vs Green-Kubo", "L = -d_X d_Y g = GK sum",
            rep.extra["fd_vs_gk"], "fd_gk")
    b.check("Einstein relation", "D = 2L", rep.einstein_residual, "einstein")
    b.check("GGC symmetry", "g(X,Y) = g(X,X-Y)", rep.extra["ggc_residual"], "ggc")


def run_chain(cfg, seed, b: Bundle):
    import numpy as np

    from .gaussian import ChainSpec, build_harmonic_chain, flow_matrix, ges_finite, sample_flux_integrals
    from .sampler import estimate_generating

    system = build_harmonic_chain(ChainSpec(cfg["n"], cfg["m"], cfg["beta"], tuple(cfg["X"])))
    X = system.X
    Ys = [np.asarray(y) for y in cfg.get("Y", [[a * X[0], c * X[1]] for a in (-0.5, 0.5, 1.5)
                                               for c in (-0.5, 0.5, 1.5)])]
    ts = _expand(cfg.get("t", [1, 5, 20]))
    rows, worst, inv = [], 0.0, 0.0
    h = system.meta["h"]
    for t in ts:
        E = flow_matrix(system, t)
        inv = max(inv, np.max(np.abs(E.T @ h @ E - h)), abs(np.linalg.det(E) - 1))
        for Y in Ys:
            g1, g2 = ges_finite(system, Y, t), ges_finite(system, X - Y, t)
            rows.append([t, Y[0], Y[1], float(g1), float(g2)])
            if g1.is_finite and g2.is_finite:
                worst = max(worst, abs(g1.value - g2.value))
            elif g1.kind != g2.kind:
                worst = math.inf
    b.table("ges", ["t", "Y_L", "Y_R", "g_t", "g_t_mirror"], rows)
    b.check("finite-time GES symmetry", "g_t(X,Y) = g_t(X,X-Y)", worst, "symmetry")
    b.check("energy conservation and unit determinant", "e^{tL^T} h e^{tL} = h", inv, "invariant")
    count = cfg.get("samples", 0)
    if count:
        t = cfg.get("probe_t", 5.0)
        ss = sample_flux_integrals(system, t, count, seed)
        mc_rows = []
        for Y in [np.asarray(p) for p in cfg.get("probes", [[0.1, -0.1], [0.05, 0.0], [0.15, -0.05]])]:
            _, (est,) = estimate_generating(ss, [1.0], level=0.99, seed=seed,
                                            observable=ss.fluxes @ Y)
            g = ges_finite(system, Y, t).value
            mc_rows.append([Y[0], Y[1], g, est.point, est.lo, est.hi])
            outside = 0.0 if est.contains(g) else min(abs(g - est.lo), abs(g - est.hi))
            b.check(f"Monte Carlo g_t at Y=({Y[0]:g},{Y[1]:g})", "g_t = log omega(exp(-Y.int Phi))",
                    outside, "kawasaki")
        b.table("monte_carlo", ["Y_L", "Y_R", "g_t", "mc", "ci_lo", "ci_hi"], mc_rows)


def run_gaussian(cfg, seed, b: Bundle):
    import numpy as np

    from .gaussian import (AsymptoticFunctional, ChainSpec, build_harmonic_chain,
                           cesaro_covariance, entropy_balance, es_finite)

    system = build_harmonic_chain(ChainSpec(cfg["n"], cfg["m"], cfg["beta"], tuple(cfg["X"])))
    t1, t2 = cfg.get("window", [100.0, 200.0])
    s1, s2 = cfg.get("slope_window", [120.0, 160.0])
    af = AsymptoticFunctional(system, cesaro_covariance(system, t1, t2))
    k = cfg.get("alpha_points", 11)
    alphas = np.linspace(-af.delta, 1 + af.delta, k + 2)[1:-1]
    rows, dev, sym = [], 0.0, 0.0
    for a in alphas:
        e = af(a)
        slope = (es_finite(system, a, s2).value - es_finite(system, a, s1).value) / (s2 - s1)
        rows.append([a, e, slope])
        dev = max(dev, abs(e - slope))
        sym = max(sym, abs(e - af(1 - a)))
    b.table("asymptotic", ["alpha", "e", "finite_time_slope"], rows)
    b.check("asymptotic functional vs finite-time growth rate", "e(alpha) = lim e_t(alpha)/t",
            dev, "limit")
    b.check("ES symmetry of the asymptotic functional", "e(alpha) = e(1-alpha)", sym, "symmetry")
    b.check("Kawasaki identity", "e(0) = e(1) = 0", max(abs(af(0.0)), abs(af(1.0))), "kawasaki")
    bal = entropy_balance(system, cfg.get("balance_t", 5.0))
    b.check("entropy balance, two routes", "Ent(omega_t|omega) = -int omega(sigma_s) ds",
            bal.discrepancy, "balance")


def run_thermo_limit(cfg, seed, b: Bundle):
    import numpy as np

    from .gaussian import ChainSpec, build_harmonic_chain, chain_thermo_limit, flux_time_average, ges_finite

    system = build_harmonic_chain(ChainSpec(cfg["n"], cfg["m"], cfg["beta"], tuple(cfg["X"])))
    X = system.X
    t1, t2 = cfg.get("window", [50.0, 150.0])
    lim = chain_thermo_limit(cfg["beta"], X, [0.0, 0.0], _expand(cfg.get("s", {"start": -0.3, "stop": 0.3, "num": 61})))
    avg = flux_time_average(system, 0, t1, t2)
    b.table("flux", ["t1", "t2", "window_average", "limit"], [[t1, t2, avg, lim.flux_L]])
    b.check("windowed flux vs thermodynamic limit", "<Phi_L> = kappa (T_L - T_R)",
            abs(avg / lim.flux_L - 1), "flux_rel")
    tg = cfg.get("t_g", 100.0)
    rows, worst = [], 0.0
    for Y in [np.asarray(y) for y in cfg.get("Y", [[0.05, -0.05], [0.0, 0.1], [-0.05, 0.05]])]:
        g = chain_thermo_limit(cfg["beta"], X, Y).g
        gt = ges_finite(system, Y, tg).value / tg
        rows.append([Y[0], Y[1], gt, g])
        worst = max(worst, abs(gt / g - 1))
    b.table("ges_limit", ["Y_L", "Y_R", "g_t_over_t", "g"], rows)
    b.check("(1/t) g_t vs closed-form limit", "g(X,Y) = -kappa log[...]", worst, "g_rel")
    b.table("rate", ["s", "I"], [[s, v] for s, v in zip(lim.rate.s_grid, lim.rate.values)])


RUNNERS = {"gas": run_gas, "bernoulli": run_bernoulli, "dilation": run_dilation,
           "markov": run_markov, "markov-family": run_markov_family, "chain": run_chain,
           "gaussian": run_gaussian, "thermo-limit": run_thermo_limit}


def run(config: dict, seed: int | None = None, out: str | None = None,
        tol_overrides: dict | None = None) -> int:
    """Execute one experiment and write its bundle; returns the exit status."""
    findings = validate(config)
    if findings:
        raise ConfigInvalid("; ".join(findings))
    config = copy.deepcopy(config)
    seed = config.get("seed", 0) if seed is None else seed
    tol = {**DEFAULT_TOL, **config.get("tolerances", {}), **(tol_overrides or {})}
    unknown = set(tol) - set(DEFAULT_TOL)
    if unknown:
        raise ConfigInvalid(f"unknown tolerance names: {sorted(unknown)}")
    bundle = Bundle(tol)
    RUNNERS[config["kind"]](config, seed, bundle)
    out_dir = Path(out or config.get("output", f"out/{config['kind']}"))
    return 0 if write_bundle(out_dir, config, seed, bundle) else 1


def _parse_tol(items):
    out = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        try:
            out[name] = float(value)
        except ValueError:
            raise ConfigInvalid(f"bad --tol entry {item!r}") from None
        if not sep or out[name] <= 0:
            raise ConfigInvalid(f"bad --tol entry {item!r}")
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="entropic", description="Entropic fluctuation experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        p.add_argument("config")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--tol", action="append", metavar="NAME=VALUE")
        p.add_argument("--threads", type=int)
    p = sub.add_parser("validate", help="check a config without running it")
    p.add_argument("config")
    p = sub.add_parser("schema", help="print the JSON schema of an experiment kind")
    p.add_argument("kind", choices=KINDS)
    args = parser.parse_args(argv)

    if args.command == "schema":
        print(json.dumps(SCHEMAS[args.kind], indent=2))
        return 0
    try:
        config = load_config(args.config)
        if args.command == "validate":
            findings = validate(config)
            print(json.dumps({"findings": findings}, indent=2))
            return 0 if not findings else 2
        if config.get("kind") != args.command:
            raise ConfigInvalid(f"config kind {config.get('kind')!r} does not match {args.command!r}")
        if args.threads:
            for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
                os.environ[var] = str(args.threads)
        status = run(config, args.seed, args.out, _parse_tol(args.tol))
    except ConfigInvalid as exc:
        print(f"config invalid: {exc}", file=sys.stderr)
        return 2
    print(f"{args.command}: {'all checks passed' if status == 0 else 'check failed'}")
    return status


if __name__ == "__main__":
    sys.exit(main())
