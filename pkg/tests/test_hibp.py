"""Tests for the two-level generative model and its marginal likelihoods."""
import math

import numpy as np
import pytest
from scipy.special import gammaln, logsumexp
from scipy.stats import chi2_contingency

from hibp_lab.countdists import (
    RngStream,
    sample_mixing_rate,
    tpoisson_sample,
    trbinom_sb_log_pmf,
    trunc_nb_log_pmf,
)
from hibp_lab.ggmath import (
    BernoulliSBP,
    GGParams,
    PoissonSlab,
    laplace_exponent,
    log_stirling,
)
from hibp_lab.hibp import (
    AggregatedData,
    GroupSpec,
    HibpDraw,
    HibpSpec,
    ValidationError,
    aggregated_from_draw,
    log_marginal_aggregated,
    log_marginal_full,
    sample_hibp,
    sample_slab_vector,
)


def poisson_group(alpha_j, zeta_j, theta_j, beta, M):
    return GroupSpec(
        slab=PoissonSlab(beta=beta), M=M, prior=GGParams(alpha_j, zeta_j, theta_j)
    )


def small_spec() -> HibpSpec:
    return HibpSpec(
        baseline=GGParams(0.3, 1.0, 0.7),
        groups=(
            poisson_group(0.25, 1.0, 0.8, 0.4, 2),
            poisson_group(0.0, 1.5, 0.6, 0.7, 3),
        ),
        gamma0=1.0,
    )


def empty_draw(spec: HibpSpec) -> HibpDraw:
    J = spec.n_groups
    return HibpDraw(
        r=0,
        X=np.zeros((J, 0), dtype=np.int64),
        doc_counts=[np.zeros((g.M, 0), dtype=np.int64) for g in spec.groups],
        agg=np.zeros((J, 0), dtype=np.int64),
        occurrences=[[] for _ in range(J)],
    )


# ---------------------------------------------------------------------------
# Generative sampling
# ---------------------------------------------------------------------------


def test_vanishing_mass_gives_empty_draws():
    spec = HibpSpec(
        baseline=GGParams(0.3, 1.0, 1e-8),
        groups=(poisson_group(0.25, 1.0, 2.0, 1.0, 3),),
    )
    for i in range(50):
        assert sample_hibp(spec, RngStream(100 + i, (0,))).r == 0


def test_feature_count_mean_matches_closed_form():
    spec = small_spec()
    phi = spec.expected_features()
    gen = RngStream(7, (1,)).generator()
    rs = np.array([sample_hibp(spec, gen).r for _ in range(3000)])
    se = rs.std() / math.sqrt(rs.size)
    assert abs(rs.mean() - phi) < 4.0 * se


def test_sample_determinism():
    spec = small_spec()
    a = sample_hibp(spec, RngStream(3, (2,)), keep_occurrences=True)
    b = sample_hibp(spec, RngStream(3, (2,)), keep_occurrences=True)
    assert a.r == b.r
    assert np.array_equal(a.X, b.X)
    assert np.array_equal(a.agg, b.agg)
    for da, db in zip(a.doc_counts, b.doc_counts):
        assert np.array_equal(da, db)


def test_draw_structural_invariants():
    spec = HibpSpec(
        baseline=GGParams(0.4, 1.0, 2.0),
        groups=(
            poisson_group(0.3, 1.0, 1.5, 1.0, 3),
            GroupSpec(slab=BernoulliSBP(alpha=0.2, beta=1.0, theta=1.2), M=4),
        ),
    )
    gen = RngStream(21, (3,)).generator()
    for _ in range(200):
        draw = sample_hibp(spec, gen, keep_occurrences=True)
        if draw.r == 0:
            continue
        assert np.all(draw.X.sum(axis=0) >= 1)
        assert np.all(draw.agg >= draw.X)  # m >= n pointwise
        for j in range(2):
            assert np.array_equal(draw.doc_counts[j].sum(axis=0), draw.agg[j])
            for k in range(draw.r):
                occ = draw.occurrences[j][k]
                assert len(occ) == draw.X[j, k]
                for vec in occ:
                    assert vec.sum() >= 1
        # Bernoulli slabs produce binary per-document entries.
        for k in range(draw.r):
            for vec in draw.occurrences[1][k]:
                assert set(np.unique(vec)).issubset({0, 1})


# ---------------------------------------------------------------------------
# Slab vectors
# ---------------------------------------------------------------------------


def test_slab_vectors_never_all_zero():
    groups = [
        poisson_group(0.25, 1.0, 1.0, 0.8, 4),
        GroupSpec(slab=BernoulliSBP(alpha=0.3, beta=1.5, theta=1.0), M=5),
    ]
    for g, group in enumerate(groups):
        vectors = sample_slab_vector(group, RngStream(5, (4, g)), size=5000)
        assert np.all(vectors.sum(axis=1) >= 1)


def test_bernoulli_single_document_is_one():
    group = GroupSpec(slab=BernoulliSBP(alpha=0.3, beta=1.5, theta=1.0), M=1)
    vectors = sample_slab_vector(group, RngStream(6, (5,)), size=100)
    assert np.all(vectors == 1)


def test_poisson_slab_totals_match_truncated_nb():
    group = poisson_group(0.35, 1.2, 1.0, 0.9, 3)
    vectors = sample_slab_vector(group, RngStream(8, (6,)), size=400_000)
    totals = vectors.sum(axis=1)
    # Totals follow the zero-truncated negative binomial with odds
    # kappa/(kappa+zeta), kappa = beta * M.
    kappa = 0.9 * 3
    p = kappa / (kappa + 1.2)
    cap = max(totals.max(), 40)
    m = np.arange(1, cap + 1)
    probs = np.exp(trunc_nb_log_pmf(m, 0.35, p))
    counts = np.bincount(totals, minlength=cap + 1)[1:]
    tv = 0.5 * np.abs(counts / counts.sum() - probs / probs.sum()).sum()
    assert tv < 0.01


def test_bernoulli_slab_totals_match_reference_weights():
    group = GroupSpec(slab=BernoulliSBP(alpha=0.0, beta=1.0, theta=1.0), M=4)
    vectors = sample_slab_vector(group, RngStream(9, (7,)), size=200_000)
    totals = vectors.sum(axis=1)
    probs = np.exp(trbinom_sb_log_pmf(np.arange(1, 5), 4, 0.0, 1.0))
    h4 = 1.0 + 0.5 + 1.0 / 3.0 + 0.25
    assert np.allclose(probs, (1.0 / np.arange(1, 5)) / h4, rtol=1e-12)
    counts = np.bincount(totals, minlength=5)[1:]
    tv = 0.5 * np.abs(counts / counts.sum() - probs).sum()
    assert tv < 0.01


def test_document_placement_is_exchangeable():
    # Each document index receives the same share of slab mass.
    group = poisson_group(0.25, 1.0, 1.0, 0.8, 4)
    vectors = sample_slab_vector(group, RngStream(10, (8,)), size=100_000)
    per_doc = vectors.mean(axis=0)
    assert per_doc.std() / per_doc.mean() < 0.02


# ---------------------------------------------------------------------------
# Marginal likelihoods
# ---------------------------------------------------------------------------


def test_empty_draw_marginal_is_void_mass():
    spec = small_spec()
    phi = spec.expected_features()
    assert math.isclose(log_marginal_full(spec, empty_draw(spec)), -phi, rel_tol=1e-12)
    J = spec.n_groups
    agg = np.zeros((J, 0), dtype=np.int64)
    assert math.isclose(
        log_marginal_aggregated(spec, agg, agg), -phi, rel_tol=1e-12
    )


def test_baseline_mass_is_a_product():
    # gamma0 and theta0 enter every formula only through their product.
    spec_a = HibpSpec(
        baseline=GGParams(0.3, 1.0, 3.0),
        groups=(poisson_group(0.25, 1.0, 0.8, 0.4, 2),),
        gamma0=2.0,
    )
    spec_b = HibpSpec(
        baseline=GGParams(0.3, 1.0, 6.0),
        groups=(poisson_group(0.25, 1.0, 0.8, 0.4, 2),),
        gamma0=1.0,
    )
    agg = np.array([[3, 1]])
    X = np.array([[2, 1]])
    assert math.isclose(
        log_marginal_aggregated(spec_a, agg, X),
        log_marginal_aggregated(spec_b, agg, X),
        rel_tol=1e-14,
    )


def compositions(total: int, parts: int):
    """Ordered tuples of ``parts`` positive integers summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def one_feature_full_draw(spec: HibpSpec, counts: tuple[int, ...]) -> HibpDraw:
    """A one-feature draw for a (J=1, M=1) spec with given occurrence counts."""
    n = len(counts)
    m = sum(counts)
    return HibpDraw(
        r=1,
        X=np.array([[n]], dtype=np.int64),
        doc_counts=[np.array([[m]], dtype=np.int64)],
        agg=np.array([[m]], dtype=np.int64),
        occurrences=[[[np.array([c], dtype=np.int64) for c in counts]]],
    )


def tiny_spec_one_group() -> HibpSpec:
    return HibpSpec(
        baseline=GGParams(0.3, 1.0, 0.5),
        groups=(poisson_group(0.25, 1.0, 0.6, 0.1, 1),),
    )


def test_full_marginal_normalizes_on_tiny_instance():
    # Summing exp(log marginal) over ordered feature lists equals
    # exp(per-feature-sum - phi); with the per-occurrence tail bounded by
    # the cap this must be 1 to 1e-6.
    spec = tiny_spec_one_group()
    phi = spec.expected_features()
    cap = 10
    log_s = -np.inf
    for total in range(1, cap + 1):
        for n in range(1, total + 1):
            for combo in compositions(total, n):
                val = log_marginal_full(spec, one_feature_full_draw(spec, combo)) + phi
                log_s = np.logaddexp(log_s, val)
    # Total mass = sum_r exp(-phi) S^r / r! = exp(S - phi).
    assert abs(math.exp(math.exp(log_s) - phi) - 1.0) < 1e-6


def test_aggregated_matches_full_partition_sum():
    # Collapsing occurrence detail: the aggregated cell value at (m, n)
    # equals the sum of the full marginal over ordered occurrence count
    # tuples of length n summing to m.
    spec = tiny_spec_one_group()
    for m in range(1, 7):
        for n in range(1, m + 1):
            agg_val = log_marginal_aggregated(
                spec, np.array([[m]]), np.array([[n]])
            )
            acc = -np.inf
            for combo in compositions(m, n):
                acc = np.logaddexp(
                    acc, log_marginal_full(spec, one_feature_full_draw(spec, combo))
                )
            assert math.isclose(acc, agg_val, rel_tol=1e-10)


def test_aggregated_normalizes_two_groups():
    # (J=2, M=1): the per-feature mass over all (m_j, n_j) cells must add
    # up to the feature rate phi, making the whole law sum to 1.
    spec = HibpSpec(
        baseline=GGParams(0.3, 1.0, 0.5),
        groups=(
            poisson_group(0.25, 1.0, 0.6, 0.1, 1),
            poisson_group(0.0, 1.0, 0.5, 0.12, 1),
        ),
    )
    phi = spec.expected_features()
    cap = 9
    log_s = -np.inf
    cells = [(0, 0)] + [(m, n) for m in range(1, cap + 1) for n in range(1, m + 1)]
    for m1, n1 in cells:
        for m2, n2 in cells:
            if m1 + m2 == 0:
                continue
            val = log_marginal_aggregated(
                spec, np.array([[m1], [m2]]), np.array([[n1], [n2]])
            )
            log_s = np.logaddexp(log_s, val + phi)
    assert abs(math.exp(math.exp(log_s) - phi) - 1.0) < 1e-6


def test_support_sentinels():
    spec = small_spec()
    agg = np.array([[3, 2], [1, 0]])
    good = np.array([[2, 1], [1, 0]])
    assert np.isfinite(log_marginal_aggregated(spec, agg, good))
    # occurrences exceeding counts
    assert log_marginal_aggregated(spec, agg, np.array([[4, 1], [1, 0]])) == -np.inf
    # counts without occurrences
    assert log_marginal_aggregated(spec, agg, np.array([[0, 1], [1, 0]])) == -np.inf
    # occurrences without counts
    assert log_marginal_aggregated(spec, agg, np.array([[2, 1], [1, 1]])) == -np.inf


def test_exchangeability_under_column_permutation():
    spec = small_spec()
    gen = np.random.default_rng(40)
    agg = gen.integers(1, 7, size=(2, 5))
    X = np.minimum(gen.integers(1, 7, size=(2, 5)), agg)
    base = log_marginal_aggregated(spec, agg, X)
    for _ in range(5):
        perm = gen.permutation(5)
        permuted = log_marginal_aggregated(spec, agg[:, perm], X[:, perm])
        # Only float summation order may differ.
        assert math.isclose(permuted, base, rel_tol=1e-13)


def test_occurrence_conditional_matches_marginal_ratio():
    # The exact conditional for one cell's occurrence count, written as a
    # ratio of joint marginals, must match the closed-form expression used
    # by the Gibbs sweep.
    spec = small_spec()
    gen = np.random.default_rng(41)
    kappa = spec.total_dish_rate()
    zeta = spec.baseline.zeta
    alpha = spec.baseline.alpha
    for _ in range(100):
        agg = gen.integers(0, 7, size=(2, 3))
        agg[:, agg.sum(axis=0) == 0] += 1
        X = np.where(agg > 0, np.minimum(gen.integers(1, 7, size=(2, 3)), agg), 0)
        j = int(gen.integers(0, 2))
        k = int(gen.integers(0, 3))
        m = int(agg[j, k])
        if m < 2:
            continue
        n_a = int(gen.integers(1, m + 1))
        n_b = int(gen.integers(1, m + 1))
        if n_a == n_b:
            continue
        Xa = X.copy()
        Xb = X.copy()
        Xa[j, k] = n_a
        Xb[j, k] = n_b
        lhs = log_marginal_aggregated(spec, agg, Xa) - log_marginal_aggregated(
            spec, agg, Xb
        )
        group = spec.groups[j]
        n_other = int(X.sum(axis=0)[k] - X[j, k])
        log_rate = math.log(group.prior.theta) + group.prior.alpha * math.log(
            group.slab.beta * group.M + group.prior.zeta
        )

        def cond(n: int) -> float:
            return (
                n * (log_rate - math.log(kappa + zeta))
                + gammaln(n_other + n - alpha)
                + log_stirling(group.prior.alpha, m, n)
            )

        rhs = cond(n_a) - cond(n_b)
        assert math.isclose(lhs, rhs, rel_tol=1e-12, abs_tol=1e-12)


def test_aggregated_from_draw_round_trip():
    spec = small_spec()
    draw = sample_hibp(spec, RngStream(55, (9,)))
    data = aggregated_from_draw(draw, spec)
    assert data.M == (2, 3)
    assert np.array_equal(data.agg, draw.agg)
    assert data.n_features == draw.r


def test_aggregated_data_validation():
    with pytest.raises(ValidationError):
        AggregatedData(M=(2,), agg=np.array([[1, -1]]))
    with pytest.raises(ValidationError):
        AggregatedData(M=(2, 3), agg=np.array([[1, 0]]))
    with pytest.raises(ValidationError):
        AggregatedData(M=(2, 2), agg=np.array([[1, 0], [1, 0]]))


# ---------------------------------------------------------------------------
# Distributional identities of the sampler
# ---------------------------------------------------------------------------


def test_group_totals_match_thinned_total_law():
    # Per-group occurrence totals from the full sampler must be
    # distributed as a Poisson number of univariate totals thinned
    # binomially — the two-level law factorizes through the total.
    spec = small_spec()
    n_draws = 40_000
    gen = RngStream(60, (10,)).generator()
    direct = np.zeros((n_draws, 2), dtype=np.int64)
    for i in range(n_draws):
        direct[i] = sample_hibp(spec, gen).X.sum(axis=1)

    phi = spec.expected_features()
    rates = spec.dish_rates()
    kappa = float(rates.sum())
    gen2 = RngStream(61, (11,)).generator()
    r_counts = gen2.poisson(phi, size=n_draws)
    total_needed = int(r_counts.sum())
    mix = sample_mixing_rate(kappa, spec.baseline, gen2, size=total_needed)
    totals = tpoisson_sample(kappa * mix, gen2)
    splits = gen2.multinomial(totals, rates / kappa)
    alt = np.zeros((n_draws, 2), dtype=np.int64)
    start = 0
    for i, rc in enumerate(r_counts):
        if rc:
            alt[i] = splits[start : start + rc].sum(axis=0)
            start += rc

    for j in range(2):
        cap = int(max(direct[:, j].max(), alt[:, j].max()))
        a = np.bincount(direct[:, j], minlength=cap + 1)
        b = np.bincount(alt[:, j], minlength=cap + 1)
        # Pool sparse tail bins so the chi-square approximation holds.
        keep = (a + b) >= 10
        table = np.stack(
            [
                np.append(a[keep], a[~keep].sum()),
                np.append(b[keep], b[~keep].sum()),
            ]
        )
        table = table[:, table.sum(axis=0) > 0]
        _, pvalue, _, _ = chi2_contingency(table)
        assert pvalue > 0.001
