import math

import numpy as np
import pytest

from entropic.errors import InsufficientSymmetricMass
from entropic.markov import finite_time_e_n, rotor_chain, sample_paths
from entropic.models import BernoulliModel, IdealGasModel, bernoulli_sample, gas_e_t, gas_sample
from entropic.sampler import (
    SampleSet,
    es_identity_check,
    estimate_generating,
    finite_gk,
    ldp_empirical,
    log_mean_exp_ci,
    symmetric_bin_width,
)

ROTOR_Q = [0.5, 0.3, 0.2]


def test_log_mean_exp_zero_tilt_is_exact():
    est = log_mean_exp_ci(np.zeros(5000))
    assert est.point == 0.0 and est.lo == 0.0 and est.hi == 0.0
    assert est.ess == 5000


def test_log_mean_exp_gaussian_oracle():
    # log E exp(Z) = 1/2 for Z ~ N(0, 1).
    z = np.random.default_rng(1).standard_normal(400_000)
    est = log_mean_exp_ci(z, level=0.99)
    assert est.contains(0.5)
    assert not est.unstable_tail
    assert est.ess < len(z)


def test_log_mean_exp_flags_a_dominating_tail():
    w = np.zeros(10_000)
    w[0] = 50.0
    assert log_mean_exp_ci(w).unstable_tail


def test_estimate_generating_matches_transfer_matrix():
    chain = rotor_chain()
    ss = sample_paths(chain, ROTOR_Q, 10, 200_000, seed=4)
    alphas = [-0.3, 0.25, 0.5, 1.0]
    gf, ests = estimate_generating(ss, alphas, level=0.99)
    for a, est in zip(alphas, ests):
        assert est.contains(finite_time_e_n(chain, ROTOR_Q, a, 10))
    assert gf.values[0] == ests[0].point


def test_estimate_generating_matches_gas_quadrature():
    model = IdealGasModel(3, 0.5, 1.0)
    ss = gas_sample(model, 400_000, seed=5, t=5.0)
    alphas = [-0.2, 0.3, 0.5, 0.8]
    _, ests = estimate_generating(ss, alphas, level=0.99)
    for a, est in zip(alphas, ests):
        assert est.contains(gas_e_t(model, a, 5.0))


def test_estimate_generating_needs_enough_samples():
    with pytest.raises(ValueError):
        estimate_generating(SampleSet("toy", 1.0, 0, np.zeros(10)), [0.5])


def test_es_identity_on_time_reversal_invariant_bernoulli():
    ss = bernoulli_sample(BernoulliModel(0.7, 0.3), 15, 1_000_000, seed=3)
    rep = es_identity_check(ss, 15)
    assert not rep.skipped
    assert rep.rel_deviation <= 0.03
    assert rep.pairs >= 5


def test_es_identity_skips_equilibrium():
    ss = bernoulli_sample(BernoulliModel(0.4, 0.4), 10, 5000, seed=0)
    rep = es_identity_check(ss, 10)
    assert rep.skipped and "equilibrium" in rep.note


def test_es_identity_needs_symmetric_mass():
    # Strictly positive records populate no mirror pair.
    ss = SampleSet("toy", 1.0, 0, np.random.default_rng(2).uniform(1, 2, 5000))
    with pytest.raises(InsufficientSymmetricMass):
        es_identity_check(ss, 1.0)


def test_symmetric_bin_width_is_freedman_diaconis_on_abs():
    v = np.linspace(-1, 1, 1001)
    q75, q25 = np.percentile(np.abs(v), [75, 25])
    assert symmetric_bin_width(v) == pytest.approx(2 * (q75 - q25) * 1001 ** (-1 / 3))


def test_finite_gk_sums():
    zero = finite_gk(lambda n: np.zeros((2, 2)), 10)
    np.testing.assert_array_equal(zero.L, 0.0)
    # Exponential correlator c^|n|: D_t = 1 + 2 sum_{n<t} c^n (1 - n/t).
    c, t = 0.5, 8
    rep = finite_gk(lambda n: np.array([[c ** abs(n)]]), t)
    expected = 1 + 2 * sum(c**n * (1 - n / t) for n in range(1, t))
    assert rep.D[0, 0] == pytest.approx(expected, abs=1e-15)
    assert rep.L[0, 0] == pytest.approx(expected / 2, abs=1e-15)
    assert rep.orr_residual == 0.0 and rep.einstein_residual == 0.0


def test_ldp_empirical_binning():
    ss = SampleSet("toy", 2.0, 0, np.array([0.2, 0.6, 0.6, 2.2]))
    rate = ldp_empirical(ss, 2.0, [0.0, 0.25, 0.5, 1.0])
    np.testing.assert_array_equal(rate.counts, [1, 2])
    np.testing.assert_allclose(rate.values, [math.log(0.25) / 2, math.log(0.5) / 2])
    assert rate.total == 4


def test_sample_set_csv_and_determinism(tmp_path):
    chain = rotor_chain()
    a = sample_paths(chain, ROTOR_Q, 5, 2000, seed=11)
    b = sample_paths(chain, ROTOR_Q, 5, 2000, seed=11)
    np.testing.assert_array_equal(a.entropy, b.entropy)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    a.to_csv(p1)
    b.to_csv(p2)
    assert p1.read_bytes() == p2.read_bytes()
    lines = p1.read_text().splitlines()
    assert lines[0] == "# model=markov horizon=5 seed=11"
    assert lines[1] == "sample_index,entropy"
    assert float(lines[2].split(",")[1]) == a.entropy[0]


def test_sample_set_rejects_non_finite():
    with pytest.raises(ValueError):
        SampleSet("toy", 1.0, 0, np.array([0.0, np.nan]))


def test_mean_entropy_is_nonnegative():
    ss = sample_paths(rotor_chain(), ROTOR_Q, 20, 100_000, seed=12)
    se = ss.entropy.std(ddof=1) / math.sqrt(ss.count)
    assert ss.entropy.mean() >= -3 * se
