"""Tests for the count-distribution layer."""
import math
import subprocess
import sys

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import logsumexp

from hibp_lab.countdists import (
    MtPParams,
    RngStream,
    gzp_log_pmf,
    gzp_sample,
    mtp_log_pmf,
    mtp_sample,
    mtp_total_log_pmf,
    nb_log_pmf,
    nb_sample,
    sample_mixing_rate,
    sum_trunc_nb_log_pmf,
    tpoisson_log_pmf,
    tpoisson_sample,
    trbinom_sb_log_pmf,
    trbinom_sb_sample,
    trunc_nb_log_pmf,
)
from hibp_lab.ggmath import GGParams, ParameterError


def tv_distance(counts: np.ndarray, probs: np.ndarray) -> float:
    emp = counts / counts.sum()
    return 0.5 * float(np.abs(emp - probs).sum())


# ---------------------------------------------------------------------------
# Mixed zero-truncated Poisson vectors
# ---------------------------------------------------------------------------


def test_mtp_single_component_unit_rates():
    params = MtPParams((1.0,), GGParams(0.0, 1.0, 1.0))
    # P(m=1) = 1 / (2 log 2) when the mixing law is gamma with unit tilt.
    assert math.isclose(
        mtp_log_pmf(params, np.array([1])),
        math.log(1.0 / (2.0 * math.log(2.0))),
        rel_tol=1e-12,
    )


def test_mtp_zero_rate_component():
    params = MtPParams((1.0, 0.0), GGParams(0.0, 1.0, 1.0))
    assert mtp_log_pmf(params, np.array([1, 1])) == -np.inf
    assert np.isfinite(mtp_log_pmf(params, np.array([2, 0])))


def test_mtp_all_zero_vector_rejected():
    params = MtPParams((1.0, 1.0), GGParams(0.5, 0.0, 1.0))
    with pytest.raises(ParameterError):
        mtp_log_pmf(params, np.array([0, 0]))


def test_mtp_two_component_normalization():
    # The stable (zeta=0) total law is a ratio of gamma functions whose
    # tail mass has the closed form gamma(M+1-a) / (gamma(M+1) gamma(1-a)),
    # so a finite enumeration plus that tail must account for everything.
    alpha, cap = 0.5, 40
    params = MtPParams((1.0, 1.0), GGParams(alpha, 0.0, 1.0))
    total = 0.0
    for m1 in range(0, cap + 1):
        for m2 in range(0, cap + 1 - m1):
            if m1 + m2 == 0:
                continue
            total += math.exp(mtp_log_pmf(params, np.array([m1, m2])))
    from scipy.special import gammaln

    tail = math.exp(gammaln(cap + 1 - alpha) - gammaln(cap + 1) - gammaln(1 - alpha))
    assert abs(total + tail - 1.0) < 1e-8


def test_mtp_total_consistency():
    # Marginalizing the split multinomially must reproduce the total's law.
    params = MtPParams((0.7, 1.8, 0.5), GGParams(0.3, 0.4, 1.0))
    for total in (1, 2, 5):
        acc = -np.inf
        for m1 in range(total + 1):
            for m2 in range(total + 1 - m1):
                m3 = total - m1 - m2
                acc = np.logaddexp(
                    acc, mtp_log_pmf(params, np.array([m1, m2, m3]))
                )
        direct = mtp_total_log_pmf(params.total, params.mixing, total)
        assert math.isclose(acc, direct, rel_tol=1e-10)


def test_mtp_sampler_matches_pmf():
    params = MtPParams((1.0, 2.0), GGParams(0.4, 0.6, 1.0))
    draws = mtp_sample(params, RngStream(11, (0,)), size=200_000)
    assert np.all(draws.sum(axis=1) >= 1)
    cap = 12
    clipped = np.clip(draws, 0, cap)
    counts = np.zeros((cap + 1, cap + 1))
    np.add.at(counts, (clipped[:, 0], clipped[:, 1]), 1.0)
    probs = np.zeros_like(counts)
    for m1 in range(cap + 1):
        for m2 in range(cap + 1):
            if m1 + m2 == 0:
                continue
            probs[m1, m2] = math.exp(mtp_log_pmf(params, np.array([m1, m2])))
    inside = probs.sum()
    # Compare on the enumerated box, putting all tail mass in one bucket.
    emp = counts / counts.sum()
    tails = 1.0 - inside
    tv = 0.5 * (np.abs(emp - probs).sum() + 0.0)
    assert tails < 0.01
    assert tv < 0.02


def test_mixing_rate_support_and_mean():
    kappa, mixing = 1.0, GGParams(0.0, 1.0, 1.0)
    draws = sample_mixing_rate(kappa, mixing, RngStream(5, (1,)), size=100_000)
    assert np.all(draws > 0)

    # Independent quadrature of E[S] for density prop to (1-e^{-kappa s}) rho(s),
    # rho the gamma jump density s^{-1} e^{-zeta s}.
    def weight(s):
        return (1.0 - np.exp(-kappa * s)) * np.exp(-s) / s

    norm, _ = quad(weight, 0, np.inf)
    mean, _ = quad(lambda s: s * weight(s), 0, np.inf)
    mean /= norm
    se = draws.std() / math.sqrt(draws.size)
    assert abs(draws.mean() - mean) < 3.0 * se


def test_mixing_rate_gamma_factor_support():
    # For alpha=0 the scale factor lives in (1/(zeta+kappa), 1/zeta); with
    # the gamma(1) radial part this bounds nothing absolute, so check the
    # factor itself through extreme quantiles at huge sample size.
    kappa, zeta = 3.0, 2.0
    gen = RngStream(6, (2,)).generator()
    q = gen.uniform(size=50_000)
    u = (zeta + kappa) ** (q - 1.0) * zeta ** (-q)
    assert np.all(u > 1.0 / (zeta + kappa) - 1e-15)
    assert np.all(u < 1.0 / zeta + 1e-15)


# ---------------------------------------------------------------------------
# Zero-truncated Poisson
# ---------------------------------------------------------------------------


def test_tpoisson_tiny_rate_degenerates_to_one():
    draws = tpoisson_sample(np.full(2_000, 1e-8), RngStream(1, (3,)))
    assert np.all(draws >= 1)
    assert (draws == 1).mean() > 1.0 - 1e-7
    # At rate 1e-8: P(m=1) = 1 - ~5e-9.
    assert math.exp(tpoisson_log_pmf(1, 1e-8)) > 1.0 - 1e-7


def test_tpoisson_normalization():
    m = np.arange(1, 61)
    deficit = 1.0 - np.exp(tpoisson_log_pmf(m, 2.0)).sum()
    assert abs(deficit) < 1e-12


def test_tpoisson_mean():
    lam = 1.0
    expected = lam / (1.0 - math.exp(-lam))  # ~1.5820
    m = np.arange(1, 80)
    mean = float((m * np.exp(tpoisson_log_pmf(m, lam))).sum())
    assert math.isclose(mean, expected, rel_tol=1e-12)
    draws = tpoisson_sample(np.full(100_000, lam), RngStream(2, (4,)))
    se = draws.std() / math.sqrt(draws.size)
    assert abs(draws.mean() - expected) < 3.5 * se


def test_tpoisson_sampler_both_regimes():
    # Below and above the inversion/rejection switch at rate 30.
    for lam in (2.0, 45.0):
        draws = tpoisson_sample(np.full(150_000, lam), RngStream(3, (5,)))
        assert draws.min() >= 1
        m = np.arange(1, max(200, int(lam * 3)))
        probs = np.exp(tpoisson_log_pmf(m, lam))
        counts = np.bincount(draws, minlength=m.size + 1)[1 : m.size + 1]
        assert tv_distance(counts, probs / probs.sum()) < 0.01


# ---------------------------------------------------------------------------
# Zero-truncated negative binomial and sums
# ---------------------------------------------------------------------------


def test_trunc_nb_value():
    # alpha=0, p=1/2: P(1) = (1/2) / (-log(1/2)) = 1/(2 log 2).
    assert math.isclose(
        math.exp(trunc_nb_log_pmf(1, 0.0, 0.5)),
        1.0 / (2.0 * math.log(2.0)),
        rel_tol=1e-12,
    )


def test_trunc_nb_normalization():
    m = np.arange(1, 201)
    for alpha, p in [(0.0, 0.5), (0.6, 0.3), (-1.2, 0.4)]:
        deficit = 1.0 - np.exp(trunc_nb_log_pmf(m, alpha, p)).sum()
        assert abs(deficit) < 1e-10


def test_trunc_nb_equals_single_component_mtp():
    # A one-component MtP with rate kappa and mixing (alpha, zeta) is the
    # truncated negative binomial with p = kappa/(kappa+zeta).
    gen = np.random.default_rng(31)
    for _ in range(50):
        alpha = float(gen.uniform(-2.0, 0.9))
        zeta = float(gen.uniform(0.1, 4.0))
        kappa = float(gen.uniform(0.1, 6.0))
        m = int(gen.integers(1, 12))
        lhs = mtp_log_pmf(MtPParams((kappa,), GGParams(alpha, zeta, 1.0)), np.array([m]))
        rhs = trunc_nb_log_pmf(m, alpha, kappa / (kappa + zeta))
        assert math.isclose(lhs, rhs, rel_tol=1e-12, abs_tol=1e-12)


def test_sum_trunc_nb_single_term_reduction():
    gen = np.random.default_rng(13)
    for _ in range(20):
        alpha = float(gen.uniform(-1.5, 0.9))
        p = float(gen.uniform(0.05, 0.95))
        m = int(gen.integers(1, 15))
        assert math.isclose(
            sum_trunc_nb_log_pmf(m, 1, alpha, p),
            trunc_nb_log_pmf(m, alpha, p),
            rel_tol=1e-12,
            abs_tol=1e-12,
        )


def test_sum_trunc_nb_brute_convolution():
    m, n, alpha, p = 5, 2, 0.5, 0.4
    acc = -np.inf
    for a in range(1, m):
        acc = np.logaddexp(
            acc,
            trunc_nb_log_pmf(a, alpha, p) + trunc_nb_log_pmf(m - a, alpha, p),
        )
    assert math.isclose(acc, sum_trunc_nb_log_pmf(m, n, alpha, p), rel_tol=1e-10)


def test_sum_trunc_nb_boundary_cases():
    assert sum_trunc_nb_log_pmf(0, 0, 0.3, 0.5) == 0.0
    assert sum_trunc_nb_log_pmf(3, 0, 0.3, 0.5) == -np.inf
    assert sum_trunc_nb_log_pmf(2, 3, 0.3, 0.5) == -np.inf
    # m == n: every summand is 1, so the value is [P(1)]^n.
    for n in (1, 2, 5):
        assert math.isclose(
            sum_trunc_nb_log_pmf(n, n, 0.25, 0.6),
            n * trunc_nb_log_pmf(1, 0.25, 0.6),
            rel_tol=1e-12,
        )


def test_sum_trunc_nb_normalizes_over_m():
    # Summing over m >= n at fixed n recovers 1 (law of a sum of n draws).
    n, alpha, p = 3, 0.35, 0.45
    vals = [sum_trunc_nb_log_pmf(m, n, alpha, p) for m in range(n, 300)]
    assert abs(1.0 - math.exp(logsumexp(vals))) < 1e-10


# ---------------------------------------------------------------------------
# Generalized Zipf and truncated stable-Beta binomial
# ---------------------------------------------------------------------------


def test_gzp_zipf_special_case():
    h3 = 1.0 + 0.5 + 1.0 / 3.0
    expected = np.array([1.0, 0.5, 1.0 / 3.0]) / h3
    got = np.exp(gzp_log_pmf(np.array([1, 2, 3]), 3, 1.0, 0.0))
    assert np.allclose(got, expected, rtol=1e-12)


def test_gzp_point_mass_and_normalization():
    assert math.exp(gzp_log_pmf(1, 1, 2.0, 0.3)) == pytest.approx(1.0, rel=1e-12)
    m = np.arange(1, 8)
    assert math.isclose(np.exp(gzp_log_pmf(m, 7, 0.8, 0.45)).sum(), 1.0, rel_tol=1e-12)
    assert gzp_log_pmf(8, 7, 0.8, 0.45) == -np.inf
    assert gzp_log_pmf(0, 7, 0.8, 0.45) == -np.inf


def test_gzp_sampler_matches_pmf():
    draws = gzp_sample(6, 1.5, 0.2, RngStream(9, (6,)), size=100_000)
    probs = np.exp(gzp_log_pmf(np.arange(1, 7), 6, 1.5, 0.2))
    counts = np.bincount(draws, minlength=7)[1:7]
    assert tv_distance(counts, probs) < 0.01


def test_trbinom_sb_reference_weights():
    got = np.exp(trbinom_sb_log_pmf(np.array([1, 2, 3, 4]), 4, 0.0, 1.0))
    assert np.allclose(got, [0.48, 0.24, 0.16, 0.12], atol=1e-12)


def test_trbinom_sb_single_document():
    assert math.exp(trbinom_sb_log_pmf(1, 1, 0.25, 2.0)) == pytest.approx(
        1.0, rel=1e-12
    )


def test_trbinom_sb_normalization():
    m = np.arange(1, 11)
    assert math.isclose(
        np.exp(trbinom_sb_log_pmf(m, 10, 0.25, 2.0)).sum(), 1.0, rel_tol=1e-12
    )


def test_trbinom_sb_sampler_matches_pmf():
    n_trials = 10
    draws = trbinom_sb_sample(n_trials, 0.25, 2.0, RngStream(17, (7,)), size=150_000)
    assert draws.min() >= 1 and draws.max() <= n_trials
    probs = np.exp(trbinom_sb_log_pmf(np.arange(1, n_trials + 1), n_trials, 0.25, 2.0))
    counts = np.bincount(draws, minlength=n_trials + 1)[1:]
    assert tv_distance(counts, probs) < 0.01


# ---------------------------------------------------------------------------
# Negative binomial helper
# ---------------------------------------------------------------------------


def test_nb_pmf_matches_scipy():
    from scipy.stats import nbinom

    shape, q = 2.7, 0.35
    x = np.arange(0, 25)
    # scipy parameterizes by success probability 1-q on the same support.
    ref = nbinom.logpmf(x, shape, 1.0 - q)
    assert np.allclose(nb_log_pmf(x, shape, q), ref, rtol=1e-10, atol=1e-10)


def test_nb_sampler_moments():
    shape, q = 1.8, 0.55
    draws = nb_sample(shape, q, RngStream(23, (8,)), size=200_000)
    mean = shape * q / (1.0 - q)
    var = shape * q / (1.0 - q) ** 2
    assert abs(draws.mean() - mean) < 4.0 * math.sqrt(var / draws.size)


# ---------------------------------------------------------------------------
# Reproducible streams
# ---------------------------------------------------------------------------


def test_stream_identity_and_children():
    a = RngStream(42, (1, 2)).generator().standard_normal(5)
    b = RngStream(42, (1, 2)).generator().standard_normal(5)
    assert np.array_equal(a, b)
    child = RngStream(42, (1,)).child(2)
    assert child == RngStream(42, (1, 2))
    other = RngStream(42, (1, 3)).generator().standard_normal(5)
    assert not np.array_equal(a, other)


def test_stream_determinism_across_processes():
    code = (
        "from hibp_lab.countdists import RngStream;"
        "print(repr(RngStream(7, (4, 2)).generator().standard_normal(3).tolist()))"
    )
    outs = {
        subprocess.run(
            [sys.executable, "-c", code], capture_output=True, text=True, check=True
        ).stdout
        for _ in range(2)
    }
    assert len(outs) == 1
    here = repr(RngStream(7, (4, 2)).generator().standard_normal(3).tolist())
    assert outs.pop().strip() == here
