"""Three-level hierarchical feature allocation: sampling, marginals, prediction.

The hierarchy adds one level to the two-level model in :mod:`.hibp`:

1. A baseline GG measure couples ``J`` category-level GG measures.
2. Each category ``j`` couples ``D_j`` subgroup processes, each of which
   owns ``M_{d,j}`` documents and a slab family (Poisson or Bernoulli
   stable-Beta), exactly like a two-level group.
3. Features first receive category occurrence counts (a multivariate
   mixed zero-truncated Poisson across categories), then every category
   occurrence spreads over that category's subgroups (another MtP row),
   and finally every subgroup occurrence spreads over documents through
   the subgroup's slab.

Log marginals follow the same conventions as :func:`.hibp.log_marginal_full`:
feature labels are opaque, the label density and global ``1/r!`` are
dropped, so values are densities over ordered feature lists.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .countdists import (
    MtPParams,
    RngStream,
    as_generator,
    mtp_sample,
    nb_sample,
    sample_mixing_rate,
    tpoisson_sample,
)
from .ggmath import (
    BernoulliSBP,
    GGParams,
    ParameterError,
    PoissonSlab,
    laplace_exponent,
    laplace_exponent_raw,
    new_dish_rate_increment,
)
from .hibp import GroupSpec, ValidationError, sample_slab_vector

__all__ = [
    "HhibpSpec",
    "HhibpDraw",
    "HhibpPredictiveBreakdown",
    "sample_hhibp",
    "log_marginal_hhibp",
    "hhibp_predict_sample",
]


@dataclass(frozen=True)
class HhibpSpec:
    """Full three-level model specification.

    ``subgroups[j]`` lists the subgroup processes of category ``j``; each
    subgroup is a :class:`~.hibp.GroupSpec` (slab family, document count,
    and — for Poisson slabs — a GG prior).
    """

    baseline: GGParams
    categories: tuple[GGParams, ...]
    subgroups: tuple[tuple[GroupSpec, ...], ...]
    gamma0: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "categories", tuple(self.categories))
        object.__setattr__(self, "subgroups", tuple(tuple(s) for s in self.subgroups))
        if len(self.categories) == 0:
            raise ParameterError("at least one category is required")
        if len(self.subgroups) != len(self.categories):
            raise ParameterError(
                f"{len(self.subgroups)} subgroup lists for {len(self.categories)} categories"
            )
        if any(len(subs) == 0 for subs in self.subgroups):
            raise ParameterError("every category needs at least one subgroup")
        if not np.isfinite(self.gamma0) or self.gamma0 <= 0.0:
            raise ParameterError(f"gamma0={self.gamma0!r} must be finite and > 0")

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    @property
    def mass0(self) -> float:
        return self.gamma0 * self.baseline.theta

    def subgroup_rates(self, j: int) -> np.ndarray:
        """New-dish rates of category ``j``'s subgroups after their documents."""
        return np.array([s.dish_rate() for s in self.subgroups[j]])

    def category_input(self, j: int) -> float:
        """Total subgroup rate feeding category ``j``'s exponent."""
        return float(self.subgroup_rates(j).sum())

    def category_rates(self) -> np.ndarray:
        """Per-category rates seen by the baseline level."""
        return np.array(
            [laplace_exponent(cat, self.category_input(j)) * cat.theta
             for j, cat in enumerate(self.categories)]
        )

    def total_category_rate(self) -> float:
        return float(self.category_rates().sum())

    def expected_features(self) -> float:
        """Mean number of distinct features over all categories."""
        return self.mass0 * laplace_exponent(self.baseline, self.total_category_rate())

    def baseline_tilt(self) -> float:
        """Posterior baseline exponential tilt added to ``zeta``."""
        return self.total_category_rate()

    def category_tilt(self, j: int) -> float:
        """Posterior category-``j`` tilt added to ``zeta_j``."""
        return self.category_input(j)


@dataclass
class HhibpDraw:
    """One realization of the three-level model.

    Attributes
    ----------
    r:
        Number of distinct features (opaque labels ``0 .. r-1``).
    Xhat:
        ``(J, r)`` integer matrix of category occurrence counts.
    C:
        ``C[j][k]`` is an ``(Xhat[j, k], D_j)`` integer matrix; each row is
        one category occurrence's split over subgroups and has a positive
        sum.
    doc_counts:
        ``doc_counts[j][d]`` is an ``(M_{d,j}, r)`` matrix of per-document
        counts summed over subgroup occurrences.
    agg:
        ``agg[j]`` is a ``(D_j, r)`` matrix of counts summed over documents.
    occurrences:
        Optional subgroup-occurrence detail: ``occurrences[j][d][k]`` is a
        list of per-document count vectors, one per subgroup occurrence.
    """

    r: int
    Xhat: np.ndarray
    C: list[list[np.ndarray]]
    doc_counts: list[list[np.ndarray]]
    agg: list[np.ndarray]
    occurrences: list[list[list[list[np.ndarray]]]] | None = None

    def feature_totals(self) -> np.ndarray:
        """Per-feature category-occurrence totals (column sums of Xhat)."""
        return self.Xhat.sum(axis=0)

    def subgroup_occurrences(self, j: int, n_subgroups: int) -> np.ndarray:
        """``(D_j, r)`` matrix of subgroup occurrence counts for category ``j``."""
        out = np.zeros((n_subgroups, self.r), dtype=np.int64)
        for k in range(self.r):
            rows = self.C[j][k]
            if rows.size:
                out[:, k] = rows.sum(axis=0)
        return out


def sample_hhibp(
    spec: HhibpSpec,
    rng: RngStream | np.random.Generator,
    keep_occurrences: bool = False,
) -> HhibpDraw:
    """Sample one full realization of the three-level model.

    Randomness is consumed in a fixed order: the feature count, the
    category occurrence matrix, then per category (in index order) the
    occurrence splits over subgroups, then per subgroup the slab vectors
    in feature order.
    """
    gen = as_generator(rng)
    cat_rates = spec.category_rates()
    kappa0 = float(cat_rates.sum())
    r = int(gen.poisson(spec.expected_features()))
    n_cat = spec.n_categories

    if r == 0:
        Xhat = np.zeros((n_cat, 0), dtype=np.int64)
    else:
        mix = sample_mixing_rate(kappa0, spec.baseline, gen, size=r)
        totals = tpoisson_sample(kappa0 * np.asarray(mix), gen)
        Xhat = gen.multinomial(totals, cat_rates / kappa0).T.astype(np.int64)

    C: list[list[np.ndarray]] = []
    for j, cat in enumerate(spec.categories):
        d_j = len(spec.subgroups[j])
        sub_rates = spec.subgroup_rates(j)
        t_j = float(sub_rates.sum())
        rows_j: list[np.ndarray] = []
        for k in range(r):
            n = int(Xhat[j, k])
            if n == 0:
                rows_j.append(np.zeros((0, d_j), dtype=np.int64))
                continue
            mix = sample_mixing_rate(t_j, cat, gen, size=n)
            row_totals = tpoisson_sample(t_j * np.asarray(mix), gen)
            rows_j.append(gen.multinomial(row_totals, sub_rates / t_j).astype(np.int64))
        C.append(rows_j)

    def occurrence_matrix(j: int) -> np.ndarray:
        out = np.zeros((len(spec.subgroups[j]), r), dtype=np.int64)
        for k in range(r):
            if C[j][k].size:
                out[:, k] = C[j][k].sum(axis=0)
        return out

    doc_counts: list[list[np.ndarray]] = []
    occurrences: list[list[list[list[np.ndarray]]]] | None = (
        [] if keep_occurrences else None
    )
    for j in range(n_cat):
        nhat = occurrence_matrix(j)
        counts_j: list[np.ndarray] = []
        occ_j: list[list[list[np.ndarray]]] = []
        for d, subgroup in enumerate(spec.subgroups[j]):
            counts = np.zeros((subgroup.M, r), dtype=np.int64)
            occ_d: list[list[np.ndarray]] = [[] for _ in range(r)]
            n_occ = int(nhat[d].sum())
            if n_occ > 0:
                vectors = sample_slab_vector(subgroup, gen, size=n_occ)
                owners = np.repeat(np.arange(r), nhat[d])
                for row, k in enumerate(owners):
                    counts[:, k] += vectors[row]
                    if keep_occurrences:
                        occ_d[int(k)].append(vectors[row].copy())
            counts_j.append(counts)
            occ_j.append(occ_d)
        doc_counts.append(counts_j)
        if keep_occurrences:
            assert occurrences is not None
            occurrences.append(occ_j)
    agg = [np.stack([c.sum(axis=0) for c in counts_j]) if counts_j else
           np.zeros((0, r), dtype=np.int64) for counts_j in doc_counts]
    return HhibpDraw(
        r=r, Xhat=Xhat, C=C, doc_counts=doc_counts, agg=agg, occurrences=occurrences
    )


def _validate_hhibp_draw(spec: HhibpSpec, draw: HhibpDraw) -> None:
    n_cat = spec.n_categories
    if draw.Xhat.shape != (n_cat, draw.r):
        raise ValidationError(
            f"Xhat has shape {draw.Xhat.shape}, expected ({n_cat}, {draw.r})"
        )
    if np.any(draw.Xhat < 0):
        raise ValidationError("category occurrence counts must be >= 0")
    if draw.r and np.any(draw.Xhat.sum(axis=0) == 0):
        raise ValidationError("every feature must occur in at least one category")
    if draw.occurrences is None:
        raise ValidationError("occurrence-level detail is required here")
    if len(draw.C) != n_cat or len(draw.occurrences) != n_cat:
        raise ValidationError("per-category lists must cover every category")
    for j in range(n_cat):
        d_j = len(spec.subgroups[j])
        if len(draw.C[j]) != draw.r:
            raise ValidationError(f"category {j}: occurrence splits must cover every feature")
        for k in range(draw.r):
            rows = np.asarray(draw.C[j][k])
            if rows.shape != (int(draw.Xhat[j, k]), d_j):
                raise ValidationError(
                    f"category {j}, feature {k}: split matrix shape {rows.shape} "
                    f"!= ({int(draw.Xhat[j, k])}, {d_j})"
                )
            if rows.size and (np.any(rows < 0) or np.any(rows.sum(axis=1) == 0)):
                raise ValidationError(
                    f"category {j}, feature {k}: every occurrence split needs a positive sum"
                )
        nhat = draw.subgroup_occurrences(j, d_j)
        for d, subgroup in enumerate(spec.subgroups[j]):
            occ_d = draw.occurrences[j][d]
            if len(occ_d) != draw.r:
                raise ValidationError(
                    f"category {j}, subgroup {d}: occurrence lists must cover every feature"
                )
            for k in range(draw.r):
                if len(occ_d[k]) != int(nhat[d, k]):
                    raise ValidationError(
                        f"category {j}, subgroup {d}, feature {k}: "
                        f"{len(occ_d[k])} slab vectors but splits say {int(nhat[d, k])}"
                    )
                for vec in occ_d[k]:
                    v = np.asarray(vec)
                    if v.shape != (subgroup.M,):
                        raise ValidationError(
                            f"category {j}, subgroup {d}, feature {k}: slab vector "
                            f"length {v.shape} != document count {subgroup.M}"
                        )
                    if np.any(v < 0) or int(v.sum()) == 0:
                        raise ValidationError(
                            f"category {j}, subgroup {d}, feature {k}: slab vectors "
                            "must be nonnegative with a positive total"
                        )
                    if not subgroup.is_poisson and np.any(v > 1):
                        raise ValidationError(
                            f"category {j}, subgroup {d}, feature {k}: Bernoulli "
                            "slabs produce 0/1 entries"
                        )


def _slab_occurrence_log_factor(subgroup: GroupSpec, vec: np.ndarray) -> float:
    """Unnormalized log weight of one subgroup-occurrence document vector.

    Pairs with the subgroup's dish rate so that summing over all nonzero
    vectors multiplied by the slab mass gives exactly that rate.
    """
    v = np.asarray(vec, dtype=np.int64)
    if subgroup.is_poisson:
        assert isinstance(subgroup.slab, PoissonSlab) and subgroup.prior is not None
        beta = subgroup.slab.beta
        alpha_s = subgroup.prior.alpha
        denom = beta * subgroup.M + subgroup.prior.zeta
        a = float(v.sum())
        return float(
            a * np.log(beta)
            - (a - alpha_s) * np.log(denom)
            + gammaln(a - alpha_s)
            - gammaln(1.0 - alpha_s)
            - np.sum(gammaln(v + 1.0))
        )
    assert isinstance(subgroup.slab, BernoulliSBP)
    slab = subgroup.slab
    m = float(v.sum())
    return float(
        gammaln(m - slab.alpha)
        + gammaln(subgroup.M - m + slab.beta + slab.alpha)
        - gammaln(subgroup.M + slab.beta)
    )


def _slab_mass(subgroup: GroupSpec) -> float:
    """Mass multiplying each subgroup occurrence (theta of prior or slab)."""
    if subgroup.is_poisson:
        assert subgroup.prior is not None
        return subgroup.prior.theta
    assert isinstance(subgroup.slab, BernoulliSBP)
    return subgroup.slab.theta


def log_marginal_hhibp(spec: HhibpSpec, draw: HhibpDraw) -> float:
    """Log marginal likelihood of a fully observed three-level draw.

    Ordered-feature-list density with label factors dropped, matching
    :func:`.hibp.log_marginal_full`.  Requires occurrence-level detail.
    """
    _validate_hhibp_draw(spec, draw)
    baseline = spec.baseline
    alpha, zeta = baseline.alpha, baseline.zeta
    kappa0 = spec.total_category_rate()
    out = -spec.mass0 * laplace_exponent(baseline, kappa0)
    if draw.r == 0:
        return float(out)

    n_k = draw.feature_totals().astype(float)
    n_total = float(n_k.sum())
    out += draw.r * np.log(spec.mass0)
    out += -(n_total - draw.r * alpha) * np.log(kappa0 + zeta)
    out += float(np.sum(gammaln(n_k - alpha))) - draw.r * gammaln(1.0 - alpha)

    for j, cat in enumerate(spec.categories):
        t_j = spec.category_input(j)
        n_j = draw.Xhat[j].astype(float)
        out += float(np.sum(n_j * np.log(cat.theta) - gammaln(n_j + 1.0)))
        for k in range(draw.r):
            rows = np.asarray(draw.C[j][k], dtype=np.int64)
            if rows.size == 0:
                continue
            c_l = rows.sum(axis=1).astype(float)
            out += float(
                np.sum(
                    gammaln(c_l - cat.alpha)
                    - gammaln(1.0 - cat.alpha)
                    - (c_l - cat.alpha) * np.log(cat.zeta + t_j)
                )
            )
            out -= float(np.sum(gammaln(rows + 1.0)))
        for d, subgroup in enumerate(spec.subgroups[j]):
            occ_d = draw.occurrences[j][d]  # type: ignore[index]
            mass = _slab_mass(subgroup)
            for k in range(draw.r):
                for vec in occ_d[k]:
                    out += np.log(mass) + _slab_occurrence_log_factor(subgroup, vec)
    return float(out)


@dataclass
class HhibpPredictiveBreakdown:
    """Counts of one predictive document for a target subgroup.

    ``counts`` concatenates per-feature totals for the ``r`` training
    features (revived + repeats) followed by the brand-new features.
    """

    category: int
    subgroup: int
    phi: float
    q_new: float
    q_category: float
    new_feature_counts: np.ndarray
    new_feature_occurrences: np.ndarray
    revived_cat_occurrences: np.ndarray
    revived_sub_occurrences: np.ndarray
    revived_counts: np.ndarray
    repeat_counts: np.ndarray

    @property
    def counts(self) -> np.ndarray:
        return np.concatenate(
            [self.revived_counts + self.repeat_counts, self.new_feature_counts]
        )


def _sample_slab_new_totals(
    subgroup: GroupSpec, n: int, gen: np.random.Generator
) -> np.ndarray:
    """Totals contributed to one new document by ``n`` fresh subgroup occurrences."""
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    if not subgroup.is_poisson:
        return np.ones(n, dtype=np.int64)
    assert isinstance(subgroup.slab, PoissonSlab) and subgroup.prior is not None
    tilted = subgroup.prior.tilted(subgroup.slab.beta * subgroup.M)
    params = MtPParams(kappas=(subgroup.slab.beta,), mixing=tilted)
    return mtp_sample(params, gen, size=n)[:, 0]


def hhibp_predict_sample(
    spec: HhibpSpec,
    draw: HhibpDraw,
    target: tuple[int, int],
    rng: RngStream | np.random.Generator,
    new_subgroup: GroupSpec | None = None,
    new_category: GGParams | None = None,
) -> HhibpPredictiveBreakdown:
    """Sample one new document for subgroup ``target=(j, d)``.

    ``j == spec.n_categories`` targets a brand-new category (requires
    ``new_category`` and ``new_subgroup``); ``d == D_j`` targets a new
    subgroup of an existing category (requires ``new_subgroup`` with
    ``M == 0``).  The four predictive blocks: brand-new features, revived
    features (category level), revived subgroup occurrences, and repeats
    of existing subgroup occurrences.  Blocks vanish automatically when
    their shape parameters are zero, so the new-subgroup and new-category
    reductions need no special casing.
    """
    gen = as_generator(rng)
    n_cat = spec.n_categories
    j, d = target
    if not (0 <= j <= n_cat):
        raise ValidationError(f"category index {j} out of range for J={n_cat}")
    if j == n_cat:
        if new_category is None or new_subgroup is None:
            raise ValidationError(
                "a new category needs both new_category and new_subgroup"
            )
        if d != 0:
            raise ValidationError("a new category starts with subgroup index 0")
        if new_subgroup.M != 0:
            raise ValidationError("a new subgroup starts with zero documents")
        cat = new_category
        subgroup = new_subgroup
        t_j = 0.0
    else:
        cat = spec.categories[j]
        d_j = len(spec.subgroups[j])
        if not (0 <= d <= d_j):
            raise ValidationError(f"subgroup index {d} out of range for D_j={d_j}")
        if d == d_j:
            if new_subgroup is None:
                raise ValidationError("a new subgroup needs new_subgroup")
            if new_subgroup.M != 0:
                raise ValidationError("a new subgroup starts with zero documents")
            subgroup = new_subgroup
        else:
            subgroup = spec.subgroups[j][d]
        t_j = spec.category_input(j)

    kappa0 = spec.total_category_rate()
    zeta0 = spec.baseline.zeta + kappa0
    zeta_j = cat.zeta + t_j

    gamma_sub = new_dish_rate_increment(subgroup.prior, subgroup.slab, subgroup.M)
    u_j = cat.theta * laplace_exponent_raw(cat.alpha, zeta_j, gamma_sub)
    phi = spec.mass0 * laplace_exponent_raw(spec.baseline.alpha, zeta0, u_j)
    q_new = u_j / (u_j + zeta0)
    q_cat = gamma_sub / (gamma_sub + zeta_j)

    r = draw.r
    tilted_baseline = GGParams(spec.baseline.alpha, zeta0, spec.baseline.theta)
    tilted_cat = GGParams(cat.alpha, zeta_j, cat.theta)

    # Block 1: brand-new features.
    r_star = int(gen.poisson(phi))
    new_occ = np.zeros(r_star, dtype=np.int64)
    new_counts = np.zeros(r_star, dtype=np.int64)
    if r_star:
        new_occ = mtp_sample(
            MtPParams(kappas=(u_j,), mixing=tilted_baseline), gen, size=r_star
        )[:, 0]
        for f in range(r_star):
            splits = mtp_sample(
                MtPParams(kappas=(gamma_sub,), mixing=tilted_cat),
                gen,
                size=int(new_occ[f]),
            )[:, 0]
            totals = _sample_slab_new_totals(subgroup, int(splits.sum()), gen)
            new_counts[f] = int(totals.sum())

    # Block 2: revived features at the category level.
    n_k = draw.feature_totals().astype(float)
    revived_cat = nb_sample(n_k - spec.baseline.alpha, q_new, gen) if r else np.zeros(0, np.int64)
    revived_cat = np.atleast_1d(np.asarray(revived_cat, dtype=np.int64))

    # Block 3: revived subgroup occurrences of existing category occurrences.
    if j < n_cat and r:
        c_jk = np.array(
            [int(np.asarray(draw.C[j][k]).sum()) for k in range(r)], dtype=float
        )
        n_jk = draw.Xhat[j].astype(float)
        shapes = c_jk - n_jk * cat.alpha
        revived_sub = np.atleast_1d(
            np.asarray(nb_sample(shapes, q_cat, gen), dtype=np.int64)
        )
    else:
        revived_sub = np.zeros(r, dtype=np.int64)

    revived_counts = np.zeros(r, dtype=np.int64)
    for k in range(r):
        n_sub = 0
        if revived_cat[k]:
            splits = mtp_sample(
                MtPParams(kappas=(gamma_sub,), mixing=tilted_cat),
                gen,
                size=int(revived_cat[k]),
            )[:, 0]
            n_sub += int(splits.sum())
        n_sub += int(revived_sub[k])
        totals = _sample_slab_new_totals(subgroup, n_sub, gen)
        revived_counts[k] = int(totals.sum())

    # Block 4: repeats of existing subgroup occurrences.
    repeat_counts = np.zeros(r, dtype=np.int64)
    existing = j < n_cat and (new_subgroup is None) and subgroup.M > 0
    if existing and r:
        nhat = draw.subgroup_occurrences(j, len(spec.subgroups[j]))[d].astype(float)
        agg = draw.agg[j][d].astype(float)
        if subgroup.is_poisson:
            assert isinstance(subgroup.slab, PoissonSlab) and subgroup.prior is not None
            beta = subgroup.slab.beta
            p_rep = beta / (beta * (subgroup.M + 1) + subgroup.prior.zeta)
            shapes = agg - nhat * subgroup.prior.alpha
            repeat_counts = np.atleast_1d(
                np.asarray(nb_sample(shapes, p_rep, gen), dtype=np.int64)
            )
        else:
            assert isinstance(subgroup.slab, BernoulliSBP)
            slab = subgroup.slab
            if draw.occurrences is None:
                raise ValidationError(
                    "Bernoulli repeats need occurrence-level training detail"
                )
            for k in range(r):
                for vec in draw.occurrences[j][d][k]:
                    m_l = float(np.asarray(vec).sum())
                    p = (m_l - slab.alpha) / (subgroup.M + slab.beta)
                    repeat_counts[k] += int(gen.random() < p)

    return HhibpPredictiveBreakdown(
        category=j,
        subgroup=d,
        phi=float(phi),
        q_new=float(q_new),
        q_category=float(q_cat),
        new_feature_counts=new_counts,
        new_feature_occurrences=new_occ,
        revived_cat_occurrences=revived_cat,
        revived_sub_occurrences=revived_sub,
        revived_counts=revived_counts,
        repeat_counts=repeat_counts,
    )
