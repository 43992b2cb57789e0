"""Tests for the three-level hierarchical feature-allocation model."""
from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from scipy.special import gammaln
from scipy.stats import chi2_contingency

from hibp_lab import (
    BernoulliSBP,
    GGParams,
    GroupSpec,
    HhibpDraw,
    HhibpSpec,
    MtPParams,
    PoissonSlab,
    RngStream,
    ValidationError,
    hhibp_predict_sample,
    laplace_exponent_raw,
    log_marginal_hhibp,
    mtp_log_pmf,
    mtp_sample,
    new_dish_rate_increment,
    sample_hhibp,
)


def pois_sub(alpha: float, zeta: float, theta: float, beta: float, M: int) -> GroupSpec:
    return GroupSpec(
        slab=PoissonSlab(beta=beta),
        M=M,
        prior=GGParams(alpha=alpha, zeta=zeta, theta=theta),
    )


def bern_sub(alpha: float, beta: float, theta: float, M: int) -> GroupSpec:
    return GroupSpec(slab=BernoulliSBP(alpha=alpha, beta=beta, theta=theta), M=M)


def small_spec(theta0: float = 2.0, theta_cat0: float = 1.2) -> HhibpSpec:
    """Two categories; category 0 has two Poisson subgroups, category 1 one."""
    return HhibpSpec(
        baseline=GGParams(alpha=0.4, zeta=1.0, theta=theta0),
        categories=(
            GGParams(alpha=0.25, zeta=2.0, theta=theta_cat0),
            GGParams(alpha=0.0, zeta=1.5, theta=0.9),
        ),
        subgroups=(
            (pois_sub(0.3, 1.0, 0.8, 0.5, 2), pois_sub(0.2, 1.0, 0.6, 0.4, 3)),
            (pois_sub(0.35, 1.2, 0.7, 0.6, 2),),
        ),
    )


def mixed_spec() -> HhibpSpec:
    """Poisson and Bernoulli subgroups side by side."""
    return HhibpSpec(
        baseline=GGParams(alpha=0.35, zeta=1.0, theta=2.5),
        categories=(
            GGParams(alpha=0.2, zeta=1.5, theta=1.0),
            GGParams(alpha=0.3, zeta=1.0, theta=0.8),
        ),
        subgroups=(
            (pois_sub(0.25, 1.0, 0.9, 0.5, 2), bern_sub(0.25, 1.5, 0.8, 3)),
            (bern_sub(0.0, 1.0, 0.7, 2),),
        ),
    )


def independent_subgroup_rate(sub: GroupSpec) -> float:
    """Subgroup new-feature rate, coded independently of the package."""
    if sub.is_poisson:
        return sub.prior.theta * laplace_exponent_raw(
            sub.prior.alpha, sub.prior.zeta, sub.slab.beta * sub.M
        )
    slab = sub.slab
    i = np.arange(1, sub.M + 1, dtype=float)
    terms = gammaln(1.0 - slab.alpha) + gammaln(slab.beta + slab.alpha + i - 1.0)
    terms -= gammaln(slab.beta + i)
    return slab.theta * float(np.sum(np.exp(terms)))


def nested_rate(spec: HhibpSpec) -> float:
    """Mean feature count, coded independently of the spec object's methods."""
    kappa0 = 0.0
    for j, cat in enumerate(spec.categories):
        t_j = sum(independent_subgroup_rate(sub) for sub in spec.subgroups[j])
        kappa0 += cat.theta * laplace_exponent_raw(cat.alpha, cat.zeta, t_j)
    return spec.gamma0 * spec.baseline.theta * laplace_exponent_raw(
        spec.baseline.alpha, spec.baseline.zeta, kappa0
    )


def empty_draw(spec: HhibpSpec) -> HhibpDraw:
    return HhibpDraw(
        r=0,
        Xhat=np.zeros((spec.n_categories, 0), dtype=np.int64),
        C=[[] for _ in spec.categories],
        doc_counts=[
            [np.zeros((s.M, 0), dtype=np.int64) for s in subs]
            for subs in spec.subgroups
        ],
        agg=[np.zeros((len(subs), 0), dtype=np.int64) for subs in spec.subgroups],
        occurrences=[[[] for _ in subs] for subs in spec.subgroups],
    )


@pytest.fixture(scope="module")
def corpus():
    """Shared draw corpus from a high-yield spec (big masses, same row law)."""
    spec = small_spec(theta0=6.0, theta_cat0=5.0)
    gen = RngStream(101, (1,)).generator()
    draws = [sample_hhibp(spec, gen) for _ in range(6000)]
    return spec, draws


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def test_vanishing_subgroup_masses_give_no_features():
    spec = HhibpSpec(
        baseline=GGParams(alpha=0.4, zeta=1.0, theta=2.0),
        categories=(GGParams(alpha=0.25, zeta=2.0, theta=1.2),),
        subgroups=((pois_sub(0.3, 1.0, 1e-9, 0.5, 2),),),
    )
    gen = RngStream(3, (1,)).generator()
    assert all(sample_hhibp(spec, gen).r == 0 for _ in range(50))


def test_mean_feature_count_matches_nested_closed_form():
    spec = small_spec()
    rate = nested_rate(spec)
    assert math.isclose(spec.expected_features(), rate, rel_tol=1e-12)
    gen = RngStream(7, (1,)).generator()
    rs = np.array([sample_hhibp(spec, gen).r for _ in range(4000)], dtype=float)
    se = rs.std(ddof=1) / math.sqrt(len(rs))
    assert abs(rs.mean() - rate) < 4.0 * se


def test_sample_determinism():
    spec = mixed_spec()
    d1 = sample_hhibp(spec, RngStream(9, (1,)), keep_occurrences=True)
    d2 = sample_hhibp(spec, RngStream(9, (1,)), keep_occurrences=True)
    assert d1.r == d2.r
    np.testing.assert_array_equal(d1.Xhat, d2.Xhat)
    for j in range(spec.n_categories):
        for k in range(d1.r):
            np.testing.assert_array_equal(d1.C[j][k], d2.C[j][k])
        for d in range(len(spec.subgroups[j])):
            np.testing.assert_array_equal(d1.doc_counts[j][d], d2.doc_counts[j][d])


def test_category_counts_match_direct_mixed_poisson(corpus):
    """Per-feature category-count columns equal the flat mixed-Poisson law.

    The nested sampler produces the category-occurrence matrix feature by
    feature; drawing columns directly from the multivariate mixed
    zero-truncated Poisson with the per-category nested rates must give the
    same distribution (two-sample chi-square on pooled count patterns).
    """
    spec, draws = corpus
    cols = np.concatenate([d.Xhat.T for d in draws if d.r], axis=0)
    gen = RngStream(55, (1,)).generator()
    direct = mtp_sample(
        MtPParams(kappas=tuple(spec.category_rates()), mixing=spec.baseline),
        gen,
        size=len(cols),
    )
    cap = 4
    base = cap + 1
    ka = np.minimum(cols, cap) @ np.array([base, 1])
    kb = np.minimum(direct, cap) @ np.array([base, 1])
    patterns = np.union1d(ka, kb)
    ta = np.array([(ka == c).sum() for c in patterns])
    tb = np.array([(kb == c).sum() for c in patterns])
    keep = (ta + tb) >= 10
    table = np.vstack(
        [np.append(ta[keep], ta[~keep].sum()), np.append(tb[keep], tb[~keep].sum())]
    )
    table = table[:, table.sum(axis=0) > 0]
    _, p_value, _, _ = chi2_contingency(table)
    assert p_value > 0.001


def test_occurrence_splits_match_mixed_poisson_rows(corpus):
    """Each category occurrence's split over subgroups is a 2-d MtP row."""
    spec, draws = corpus
    rows = np.concatenate(
        [d.C[0][k] for d in draws for k in range(d.r) if d.C[0][k].size],
        axis=0,
    )
    assert len(rows) > 60_000
    params = MtPParams(
        kappas=tuple(spec.subgroup_rates(0)), mixing=spec.categories[0]
    )
    tv = 0.0
    covered = 0.0
    for c0 in range(8):
        for c1 in range(8):
            if c0 + c1 == 0:
                continue
            p_true = float(np.exp(mtp_log_pmf(params, np.array([c0, c1]))))
            p_emp = float(np.mean((rows[:, 0] == c0) & (rows[:, 1] == c1)))
            tv += abs(p_true - p_emp)
            covered += p_true
    assert 1.0 - covered < 1e-5
    assert tv < 0.01


def test_count_identities_hold_pointwise():
    """All cross-structure count identities hold as exact integers."""
    spec = mixed_spec()
    gen = RngStream(21, (1,)).generator()
    checked_rows = 0
    for _ in range(200):
        draw = sample_hhibp(spec, gen, keep_occurrences=True)
        if draw.r:
            assert np.all(draw.Xhat.sum(axis=0) >= 1)
        grand_total = 0
        for j in range(spec.n_categories):
            d_j = len(spec.subgroups[j])
            nhat = draw.subgroup_occurrences(j, d_j)
            v_j = 0
            for k in range(draw.r):
                rows = draw.C[j][k]
                assert rows.shape == (int(draw.Xhat[j, k]), d_j)
                if rows.size:
                    assert np.all(rows.sum(axis=1) >= 1)
                    checked_rows += len(rows)
                # column sums of the split matrix are the subgroup occurrences
                col = rows.sum(axis=0) if rows.size else np.zeros(d_j, int)
                np.testing.assert_array_equal(col, nhat[:, k])
            for d, sub in enumerate(spec.subgroups[j]):
                occ_d = draw.occurrences[j][d]
                v_dj = 0
                for k in range(draw.r):
                    assert len(occ_d[k]) == int(nhat[d, k])
                    v_dj += len(occ_d[k])
                    total_k = sum(int(np.sum(v)) for v in occ_d[k])
                    assert total_k == int(draw.agg[j][d][k])
                    for vec in occ_d[k]:
                        assert vec.shape == (sub.M,)
                        assert int(vec.sum()) >= 1
                        if not sub.is_poisson:
                            assert np.all(vec <= 1)
                # v_{d,j}: total subgroup-(d,j) occurrences three ways
                assert v_dj == int(nhat[d].sum())
                assert v_dj == sum(
                    int(draw.C[j][k][:, d].sum())
                    for k in range(draw.r)
                    if draw.C[j][k].size
                )
                np.testing.assert_array_equal(
                    draw.doc_counts[j][d].sum(axis=0), draw.agg[j][d]
                )
                v_j += v_dj
            grand_total += v_j
        # total subgroup occurrences seen from the split matrices
        alt = sum(
            int(draw.C[j][k].sum())
            for j in range(spec.n_categories)
            for k in range(draw.r)
            if draw.C[j][k].size
        )
        assert grand_total == alt
    assert checked_rows > 0


# ---------------------------------------------------------------------------
# marginal likelihood
# ---------------------------------------------------------------------------


def test_empty_draw_marginal_is_minus_rate():
    spec = small_spec()
    value = log_marginal_hhibp(spec, empty_draw(spec))
    assert math.isclose(value, -nested_rate(spec), rel_tol=1e-12)


def one_feature_draw(
    spec: HhibpSpec, n: int, c_tuple: tuple[int, ...], a_tuple: tuple[int, ...]
) -> HhibpDraw:
    """Single-feature draw for a J=1, D=1, M=1 spec."""
    assert len(c_tuple) == n and sum(c_tuple) == len(a_tuple)
    counts = np.array([[sum(a_tuple)]], dtype=np.int64)
    return HhibpDraw(
        r=1,
        Xhat=np.array([[n]], dtype=np.int64),
        C=[[np.array([[c] for c in c_tuple], dtype=np.int64)]],
        doc_counts=[[counts.copy()]],
        agg=[counts.copy()],
        occurrences=[[[[np.array([a], dtype=np.int64) for a in a_tuple]]]],
    )


def test_marginal_enumeration_tiny_instance():
    """Exhaustive single-category enumeration carries total mass 1.

    With label factors dropped, the total mass over draws equals
    ``exp(S - rate)`` where ``S`` sums the per-feature weights; truncation
    caps are chosen so the missing tail is far below the tolerance.
    """
    spec = HhibpSpec(
        baseline=GGParams(alpha=0.3, zeta=1.0, theta=0.5),
        categories=(GGParams(alpha=0.25, zeta=1.2, theta=0.6),),
        subgroups=((pois_sub(0.2, 1.5, 0.7, 0.1, 1),),),
    )
    rate = nested_rate(spec)
    weights = []
    for n in range(1, 4):
        for c_tuple in itertools.product(range(1, 4), repeat=n):
            s = sum(c_tuple)
            # multisets of occurrence totals, with their permutation counts
            for a_multi in itertools.combinations_with_replacement(range(1, 6), s):
                perm = gammaln(s + 1)
                for a in set(a_multi):
                    perm -= gammaln(a_multi.count(a) + 1)
                lm = log_marginal_hhibp(spec, one_feature_draw(spec, n, c_tuple, a_multi))
                weights.append(lm + rate + perm)
    log_s = float(np.logaddexp.reduce(np.array(weights)))
    # the per-feature mass S equals the feature rate itself
    assert abs(math.exp(math.exp(log_s) - rate) - 1.0) < 1e-6


def test_marginal_permutation_invariance():
    spec = mixed_spec()
    gen = RngStream(33, (1,)).generator()
    draw = None
    while draw is None or draw.r < 2:
        draw = sample_hhibp(spec, gen, keep_occurrences=True)
    base = log_marginal_hhibp(spec, draw)
    perm = np.arange(draw.r)[::-1].copy()
    permuted = HhibpDraw(
        r=draw.r,
        Xhat=draw.Xhat[:, perm],
        C=[[draw.C[j][k] for k in perm] for j in range(spec.n_categories)],
        doc_counts=[
            [m[:, perm] for m in draw.doc_counts[j]] for j in range(spec.n_categories)
        ],
        agg=[a[:, perm] for a in draw.agg],
        occurrences=[
            [[draw.occurrences[j][d][k] for k in perm] for d in range(len(spec.subgroups[j]))]
            for j in range(spec.n_categories)
        ],
    )
    assert math.isclose(base, log_marginal_hhibp(spec, permuted), rel_tol=1e-13)


def test_marginal_validation_errors():
    spec = small_spec()
    gen = RngStream(41, (1,)).generator()
    draw = None
    while draw is None or draw.r < 1:
        draw = sample_hhibp(spec, gen, keep_occurrences=True)

    without_detail = HhibpDraw(
        r=draw.r, Xhat=draw.Xhat, C=draw.C, doc_counts=draw.doc_counts, agg=draw.agg
    )
    with pytest.raises(ValidationError):
        log_marginal_hhibp(spec, without_detail)

    bad_shape = HhibpDraw(
        r=draw.r,
        Xhat=draw.Xhat[:1],
        C=draw.C,
        doc_counts=draw.doc_counts,
        agg=draw.agg,
        occurrences=draw.occurrences,
    )
    with pytest.raises(ValidationError):
        log_marginal_hhibp(spec, bad_shape)

    zero_col = draw.Xhat.copy()
    zero_col[:, 0] = 0
    with pytest.raises(ValidationError):
        log_marginal_hhibp(
            spec,
            HhibpDraw(
                r=draw.r,
                Xhat=zero_col,
                C=draw.C,
                doc_counts=draw.doc_counts,
                agg=draw.agg,
                occurrences=draw.occurrences,
            ),
        )


def test_posterior_tilts_double_coded():
    spec = mixed_spec()
    kappa0 = 0.0
    for j, cat in enumerate(spec.categories):
        t_j = sum(independent_subgroup_rate(sub) for sub in spec.subgroups[j])
        assert abs(spec.category_tilt(j) - t_j) < 1e-12
        kappa0 += cat.theta * laplace_exponent_raw(cat.alpha, cat.zeta, t_j)
    assert abs(spec.baseline_tilt() - kappa0) < 1e-12


# ---------------------------------------------------------------------------
# prediction
# ---------------------------------------------------------------------------


def trained_draw(spec: HhibpSpec, seed: int = 17) -> HhibpDraw:
    gen = RngStream(seed, (1,)).generator()
    draw = None
    while draw is None or draw.r < 3:
        draw = sample_hhibp(spec, gen, keep_occurrences=True)
    return draw


def test_new_category_prediction_has_only_new_blocks():
    spec = small_spec()
    draw = trained_draw(spec)
    out = hhibp_predict_sample(
        spec,
        draw,
        target=(spec.n_categories, 0),
        rng=RngStream(5, (2,)),
        new_category=GGParams(alpha=0.3, zeta=1.0, theta=1.0),
        new_subgroup=pois_sub(0.25, 1.0, 0.8, 0.5, 0),
    )
    assert np.all(out.revived_sub_occurrences == 0)
    assert np.all(out.repeat_counts == 0)
    assert 0.0 < out.q_new < 1.0
    assert 0.0 < out.q_category < 1.0
    assert out.counts.shape == (draw.r + len(out.new_feature_counts),)


def test_new_subgroup_prediction_zeroes_repeats():
    spec = small_spec()
    draw = trained_draw(spec)
    out = hhibp_predict_sample(
        spec,
        draw,
        target=(0, len(spec.subgroups[0])),
        rng=RngStream(6, (2,)),
        new_subgroup=pois_sub(0.25, 1.0, 0.8, 0.5, 0),
    )
    assert np.all(out.repeat_counts == 0)
    assert 0.0 < out.q_new < 1.0
    assert 0.0 < out.q_category < 1.0


def test_q_probabilities_in_unit_interval():
    spec = mixed_spec()
    draw = trained_draw(spec, seed=23)
    targets = [(0, 0), (0, 1), (1, 0)]
    for target in targets:
        out = hhibp_predict_sample(spec, draw, target, RngStream(8, (target[0], target[1])))
        assert 0.0 < out.q_new < 1.0
        assert 0.0 < out.q_category < 1.0
        assert out.phi > 0.0


def test_prediction_determinism():
    spec = mixed_spec()
    draw = trained_draw(spec, seed=23)
    a = hhibp_predict_sample(spec, draw, (0, 0), RngStream(12, (3,)))
    b = hhibp_predict_sample(spec, draw, (0, 0), RngStream(12, (3,)))
    np.testing.assert_array_equal(a.counts, b.counts)


def test_bernoulli_repeats_bounded_by_occurrences():
    spec = mixed_spec()
    draw = trained_draw(spec, seed=29)
    nhat = draw.subgroup_occurrences(1, 1)
    gen = RngStream(31, (2,)).generator()
    for _ in range(20):
        out = hhibp_predict_sample(spec, draw, (1, 0), gen)
        assert np.all(out.repeat_counts <= nhat[0])


def test_new_feature_count_mean_matches_closed_form():
    """Brand-new block mean: rate x expected counts per feature.

    The expected total from brand-new features factorizes over the three
    levels; each level's truncated mixed-Poisson mean has the closed form
    kappa * tilt^(alpha-1) / exponent.
    """
    spec = small_spec()
    target = (0, 1)
    sub = spec.subgroups[0][1]
    cat = spec.categories[0]
    zeta0 = spec.baseline.zeta + spec.total_category_rate()
    zeta_j = cat.zeta + spec.category_input(0)
    g_sub = new_dish_rate_increment(sub.prior, sub.slab, sub.M)
    u_j = cat.theta * laplace_exponent_raw(cat.alpha, zeta_j, g_sub)
    phi = spec.mass0 * laplace_exponent_raw(spec.baseline.alpha, zeta0, u_j)

    def mtp_total_mean(kappa: float, alpha: float, zeta: float) -> float:
        return kappa * zeta ** (alpha - 1.0) / laplace_exponent_raw(alpha, zeta, kappa)

    zeta_slab = sub.prior.zeta + sub.slab.beta * sub.M
    closed = (
        phi
        * mtp_total_mean(u_j, spec.baseline.alpha, zeta0)
        * mtp_total_mean(g_sub, cat.alpha, zeta_j)
        * mtp_total_mean(sub.slab.beta, sub.prior.alpha, zeta_slab)
    )

    base = empty_draw(spec)
    gen = RngStream(61, (1,)).generator()
    totals = np.array(
        [
            hhibp_predict_sample(spec, base, target, gen).new_feature_counts.sum()
            for _ in range(30_000)
        ],
        dtype=float,
    )
    se = totals.std(ddof=1) / math.sqrt(len(totals))
    assert abs(totals.mean() - closed) < 4.0 * se


def test_prediction_validation_errors():
    spec = small_spec()
    draw = trained_draw(spec)
    with pytest.raises(ValidationError):
        hhibp_predict_sample(spec, draw, (5, 0), RngStream(1, (1,)))
    with pytest.raises(ValidationError):
        hhibp_predict_sample(spec, draw, (spec.n_categories, 0), RngStream(1, (1,)))
    with pytest.raises(ValidationError):
        hhibp_predict_sample(
            spec,
            draw,
            (spec.n_categories, 1),
            RngStream(1, (1,)),
            new_category=GGParams(alpha=0.3, zeta=1.0, theta=1.0),
            new_subgroup=pois_sub(0.25, 1.0, 0.8, 0.5, 0),
        )
    with pytest.raises(ValidationError):
        hhibp_predict_sample(
            spec,
            draw,
            (0, len(spec.subgroups[0])),
            RngStream(1, (1,)),
            new_subgroup=pois_sub(0.25, 1.0, 0.8, 0.5, 3),
        )


def test_spec_validation_errors():
    with pytest.raises(Exception):
        HhibpSpec(
            baseline=GGParams(alpha=0.4, zeta=1.0, theta=2.0),
            categories=(),
            subgroups=(),
        )
    with pytest.raises(Exception):
        HhibpSpec(
            baseline=GGParams(alpha=0.4, zeta=1.0, theta=2.0),
            categories=(GGParams(alpha=0.25, zeta=2.0, theta=1.2),),
            subgroups=((pois_sub(0.3, 1.0, 0.8, 0.5, 2),), ()),
        )
    with pytest.raises(Exception):
        HhibpSpec(
            baseline=GGParams(alpha=0.4, zeta=1.0, theta=2.0),
            categories=(GGParams(alpha=0.25, zeta=2.0, theta=1.2),),
            subgroups=((),),
        )
