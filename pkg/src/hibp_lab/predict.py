"""Predictive laws for the next document, test-latent Gibbs, classification.

Given training counts and their latent occurrence matrix, the law of one
more document in a target group splits into three independent blocks:

1. brand-new features — a Poisson number of fresh atoms, each with a
   zero-truncated occurrence count and slab totals;
2. revived features — observed atoms re-expressed through negative
   binomial occurrence counts driven by the posterior feature jumps;
3. repeats — additional counts from the slab jumps already realized in
   the target group (negative binomial for Poisson slabs, Bernoulli for
   stable-Beta slabs).

For documents observed only as aggregated per-feature totals, the block
structure survives with the occurrence-level detail collapsed into
generalized Stirling numbers.  The latent split of a test document
(occurrence counts for new features, revived occurrence and count splits
for old ones) factorizes across features, so the predictive probability
of a test document is computed by exact per-feature marginalization; a
Gibbs sweep over the same latents is provided for sampling-based checks
and diagnostics.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .countdists import (
    MtPParams,
    RngStream,
    as_generator,
    mtp_sample,
    nb_log_pmf,
    nb_sample,
    sum_trunc_nb_log_pmf,
)
from .ggmath import (
    BernoulliSBP,
    GGParams,
    ParameterError,
    PoissonSlab,
    laplace_exponent_raw,
    new_dish_rate_increment,
    stirling_table,
)
from .hibp import AggregatedData, GroupSpec, HibpDraw, HibpSpec, ValidationError
from .posterior import PosteriorJumps

__all__ = [
    "TestDoc",
    "TestLatents",
    "PredictiveBreakdown",
    "FullPredictiveOutcome",
    "ClassifyResult",
    "predict_sample",
    "log_predictive_full",
    "log_predictive_aggregated",
    "marginal_log_predictive",
    "mc_log_predictive",
    "init_test_latents",
    "gibbs_test_latents",
    "classify",
    "overlap",
]


@dataclass(frozen=True)
class TestDoc:
    """One held-out document: totals on training features plus new ones.

    ``counts[k]`` is the document's total on training feature ``k``;
    ``new_counts`` lists totals on features absent from training (each
    necessarily positive).
    """

    counts: np.ndarray
    new_counts: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "new_counts", tuple(int(m) for m in self.new_counts))
        if counts.ndim != 1 or np.any(counts < 0):
            raise ValidationError("feature counts must be a 1-d array of ints >= 0")
        if any(m < 1 for m in self.new_counts):
            raise ValidationError("new-feature counts must be >= 1")

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + sum(self.new_counts)


@dataclass(frozen=True)
class TestLatents:
    """Latent split of a test document for one target group.

    ``n_new[f]`` — occurrence count behind new feature ``f``;
    ``n_rev[k]`` — revived occurrences of training feature ``k``;
    ``m_rev[k]`` — the portion of ``counts[k]`` produced by those revived
    occurrences (the remainder is attributed to repeats).
    """

    n_new: np.ndarray
    n_rev: np.ndarray
    m_rev: np.ndarray

    def __post_init__(self) -> None:
        for name in ("n_new", "n_rev", "m_rev"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64))


@dataclass
class PredictiveBreakdown:
    """A sampled next document, kept in its three predictive blocks."""

    group: int
    phi: float
    q: float
    new_feature_occurrences: np.ndarray
    new_feature_counts: np.ndarray
    revived_occurrences: np.ndarray
    revived_counts: np.ndarray
    repeat_counts: np.ndarray

    @property
    def counts(self) -> np.ndarray:
        """Per-feature totals: training features first, then new ones."""
        return np.concatenate(
            [self.revived_counts + self.repeat_counts, self.new_feature_counts]
        )

    def as_test_doc(self) -> TestDoc:
        old = self.revived_counts + self.repeat_counts
        new = tuple(int(m) for m in self.new_feature_counts if m > 0)
        return TestDoc(counts=old, new_counts=new)


@dataclass(frozen=True)
class FullPredictiveOutcome:
    """Occurrence-level outcome of one predictive document.

    ``new_features[f]`` — per-occurrence totals of new feature ``f``;
    ``revived[k]`` — per-occurrence totals of revived occurrences of
    training feature ``k``; ``repeats[k][l]`` — the document's count from
    training occurrence ``l`` of feature ``k`` in the target group.
    """

    new_features: tuple[tuple[int, ...], ...]
    revived: tuple[tuple[int, ...], ...]
    repeats: tuple[tuple[int, ...], ...]


class _Context:
    """Precomputed constants for predictions targeting one group."""

    def __init__(
        self,
        spec: HibpSpec,
        data: HibpDraw | AggregatedData,
        group: int,
        X: np.ndarray | None,
        new_group: GroupSpec | None,
    ) -> None:
        if isinstance(data, HibpDraw):
            if X is not None:
                raise ValidationError("X is taken from the draw; do not pass it separately")
            X_arr = np.asarray(data.X, dtype=np.int64)
            agg = np.asarray(data.agg, dtype=np.int64)
            occurrences = data.occurrences
        elif isinstance(data, AggregatedData):
            if X is None:
                raise ValidationError("aggregated data needs the latent occurrence matrix X")
            X_arr = np.asarray(X, dtype=np.int64)
            agg = data.agg
            occurrences = None
            if X_arr.shape != agg.shape:
                raise ValidationError(f"X shape {X_arr.shape} != counts shape {agg.shape}")
        else:
            raise ValidationError(f"unsupported data object {type(data)!r}")

        n_groups = spec.n_groups
        if group == n_groups:
            if new_group is None:
                raise ValidationError("predicting for a brand-new group needs new_group")
            if new_group.M != 0:
                raise ValidationError("a brand-new group starts with zero documents")
            target = new_group
        elif 0 <= group < n_groups:
            if new_group is not None:
                raise ValidationError("new_group applies only to group index J")
            target = spec.groups[group]
        else:
            raise ValidationError(f"group index {group} out of range for J={n_groups}")

        self.spec = spec
        self.group = group
        self.target = target
        self.is_new_group = group == n_groups
        self.X = X_arr
        self.agg = agg
        self.occurrences = occurrences
        self.r = int(X_arr.shape[1])
        self.n_k = X_arr.sum(axis=0).astype(float)
        if self.r and np.any(self.n_k == 0):
            raise ValidationError("every training feature needs at least one occurrence")
        if self.is_new_group:
            self.n_j = np.zeros(self.r)
            self.m_j = np.zeros(self.r)
        else:
            self.n_j = X_arr[group].astype(float)
            self.m_j = agg[group].astype(float)

        baseline = spec.baseline
        self.alpha = baseline.alpha
        kappa = spec.total_dish_rate()
        self.zeta_tilted = baseline.zeta + kappa
        self.gamma = new_dish_rate_increment(target.prior, target.slab, target.M)
        self.q = self.gamma / (self.gamma + self.zeta_tilted)
        self.phi = spec.mass0 * laplace_exponent_raw(
            self.alpha, self.zeta_tilted, self.gamma
        )
        self.log_mass0 = np.log(spec.mass0)
        self.tilted_baseline = GGParams(self.alpha, self.zeta_tilted, baseline.theta)

        if target.is_poisson:
            assert isinstance(target.slab, PoissonSlab) and target.prior is not None
            self.alpha_j = target.prior.alpha
            self.theta_j = target.prior.theta
            self.beta_j = target.slab.beta
            self.slab_denom = self.beta_j * target.M + target.prior.zeta
            self.B = self.beta_j * (target.M + 1) + target.prior.zeta
            self.p_tilde = self.beta_j / self.B
            self.tilted_slab_prior = GGParams(
                self.alpha_j, self.slab_denom, self.theta_j
            )
        else:
            assert isinstance(target.slab, BernoulliSBP)
            self.alpha_j = target.slab.alpha
            self.theta_j = target.slab.theta
            self.beta_j = None
            self.B = None
            self.p_tilde = None
            self.tilted_slab_prior = None

    def require_poisson(self, what: str) -> None:
        if not self.target.is_poisson:
            raise ValidationError(f"{what} supports Poisson-slab target groups only")

    # --- per-feature log-weight pieces for the aggregated predictive ---

    def new_feature_logweights(self, m1: int, table: np.ndarray) -> np.ndarray:
        """Log weights over ``n1 = 1..m1`` for one new feature with total ``m1``."""
        n = np.arange(1, m1 + 1, dtype=float)
        const = (
            self.log_mass0
            - gammaln(1.0 - self.alpha)
            + m1 * np.log(self.beta_j)
            - m1 * np.log(self.B)
            - gammaln(m1 + 1.0)
        )
        return (
            const
            + gammaln(n - self.alpha)
            - (n - self.alpha) * np.log(self.gamma + self.zeta_tilted)
            + n * np.log(self.theta_j)
            + n * self.alpha_j * np.log(self.B)
            + table[m1, 1 : m1 + 1]
        )

    def split_grid(self, c_max: int, table: np.ndarray) -> np.ndarray:
        """``grid[m2, n2]`` = log P(sum of n2 truncated counts = m2)."""
        size = c_max + 1
        grid = np.full((size, size), -np.inf)
        grid[0, 0] = 0.0
        if c_max == 0:
            return grid
        m2 = np.arange(size, dtype=float)[:, None]
        n2 = np.arange(size, dtype=float)[None, :]
        with np.errstate(invalid="ignore"):
            vals = (
                m2 * np.log(self.p_tilde)
                - n2 * np.log(laplace_exponent_raw(self.alpha_j, 1.0 - self.p_tilde, self.p_tilde))
                + gammaln(n2 + 1.0)
                + table[: size, : size]
                - gammaln(m2 + 1.0)
            )
        valid = (n2 >= 1) & (m2 >= n2)
        grid = np.where(valid, vals, grid)
        return grid


def _resolve_context(spec, data, group, X, new_group=None) -> _Context:
    return _Context(spec, data, group, X, new_group)


def predict_sample(
    spec: HibpSpec,
    data: HibpDraw | AggregatedData,
    group: int,
    rng: RngStream | np.random.Generator,
    X: np.ndarray | None = None,
    new_group: GroupSpec | None = None,
    jumps: PosteriorJumps | None = None,
) -> PredictiveBreakdown:
    """Sample one next document for ``group`` (``group == J`` is brand new).

    With ``jumps`` supplied the revived and repeat blocks condition on
    realized posterior jumps (Poisson mixtures / Bernoulli jumps); without
    it they use the marginal closed forms (negative binomials, posterior
    Bernoulli means).  Both routes target the same law.
    """
    ctx = _resolve_context(spec, data, group, X, new_group)
    gen = as_generator(rng)
    r = ctx.r

    def slab_new_totals(n: int) -> np.ndarray:
        if n == 0:
            return np.zeros(0, dtype=np.int64)
        if ctx.target.is_poisson:
            params = MtPParams(kappas=(ctx.beta_j,), mixing=ctx.tilted_slab_prior)
            return mtp_sample(params, gen, size=n)[:, 0]
        return np.ones(n, dtype=np.int64)

    # Block 1: brand-new features.
    r_star = int(gen.poisson(ctx.phi))
    new_occ = np.zeros(r_star, dtype=np.int64)
    new_counts = np.zeros(r_star, dtype=np.int64)
    if r_star:
        new_occ = mtp_sample(
            MtPParams(kappas=(ctx.gamma,), mixing=ctx.tilted_baseline),
            gen,
            size=r_star,
        )[:, 0]
        for f in range(r_star):
            new_counts[f] = int(slab_new_totals(int(new_occ[f])).sum())

    # Block 2: revived features.
    if r:
        if jumps is None:
            revived_occ = np.atleast_1d(
                np.asarray(nb_sample(ctx.n_k - ctx.alpha, ctx.q, gen), dtype=np.int64)
            )
        else:
            revived_occ = gen.poisson(ctx.gamma * np.asarray(jumps.features)).astype(np.int64)
    else:
        revived_occ = np.zeros(0, dtype=np.int64)
    revived_counts = np.array(
        [int(slab_new_totals(int(n)).sum()) for n in revived_occ], dtype=np.int64
    )

    # Block 3: repeats within the target group.
    repeat_counts = np.zeros(r, dtype=np.int64)
    if not ctx.is_new_group and r:
        if ctx.target.is_poisson:
            if jumps is None:
                shapes = ctx.m_j - ctx.n_j * ctx.alpha_j
                repeat_counts = np.atleast_1d(
                    np.asarray(nb_sample(shapes, ctx.p_tilde, gen), dtype=np.int64)
                )
            else:
                totals = np.asarray(jumps.slab_totals[group], dtype=float)
                if np.any(~np.isfinite(totals)):
                    raise ValidationError("posterior jumps lack totals for this group")
                repeat_counts = gen.poisson(ctx.beta_j * totals).astype(np.int64)
        else:
            slab = ctx.target.slab
            assert isinstance(slab, BernoulliSBP)
            if jumps is not None and jumps.slabs is not None:
                for k in range(r):
                    s = np.asarray(jumps.slabs[group][k], dtype=float)
                    repeat_counts[k] = int(np.sum(gen.random(s.size) < s))
            else:
                if ctx.occurrences is None:
                    raise ValidationError(
                        "Bernoulli repeats need occurrence-level training detail"
                    )
                M = ctx.target.M
                for k in range(r):
                    for vec in ctx.occurrences[group][k]:
                        m_l = float(np.asarray(vec).sum())
                        p = (m_l - slab.alpha) / (M + slab.beta)
                        repeat_counts[k] += int(gen.random() < p)

    return PredictiveBreakdown(
        group=group,
        phi=float(ctx.phi),
        q=float(ctx.q),
        new_feature_occurrences=new_occ,
        new_feature_counts=new_counts,
        revived_occurrences=revived_occ,
        revived_counts=revived_counts,
        repeat_counts=repeat_counts,
    )


def _slab_new_log_unnorm(ctx: _Context, t: int) -> float:
    """Marginal-convention log weight of one fresh occurrence with total ``t``."""
    if ctx.target.is_poisson:
        if t < 1:
            return -np.inf
        return float(
            gammaln(t - ctx.alpha_j)
            - gammaln(1.0 - ctx.alpha_j)
            + t * np.log(ctx.beta_j)
            - (t - ctx.alpha_j) * np.log(ctx.B)
            - gammaln(t + 1.0)
        )
    slab = ctx.target.slab
    assert isinstance(slab, BernoulliSBP)
    if t != 1:
        return -np.inf
    M = ctx.target.M
    return float(
        gammaln(1.0 - slab.alpha)
        + gammaln(M + slab.beta + slab.alpha)
        - gammaln(M + 1 + slab.beta)
    )


def log_predictive_full(
    spec: HibpSpec,
    data: HibpDraw,
    group: int,
    outcome: FullPredictiveOutcome,
    new_group: GroupSpec | None = None,
) -> float:
    """Pointwise log-probability of an occurrence-level predictive outcome.

    Same ordered-list conventions as :func:`.hibp.log_marginal_full`:
    multiplying by the training marginal and correcting for occurrence
    interleavings reproduces the enlarged marginal exactly.
    """
    ctx = _resolve_context(spec, data, group, None, new_group)
    r = ctx.r
    if len(outcome.revived) != r or len(outcome.repeats) != r:
        raise ValidationError("outcome blocks must cover every training feature")

    out = -ctx.phi
    for totals in outcome.new_features:
        n1 = len(totals)
        if n1 < 1:
            raise ValidationError("new features need at least one occurrence")
        out += (
            ctx.log_mass0
            + gammaln(n1 - ctx.alpha)
            - gammaln(1.0 - ctx.alpha)
            - (n1 - ctx.alpha) * np.log(ctx.gamma + ctx.zeta_tilted)
            - gammaln(n1 + 1.0)
            + n1 * np.log(ctx.theta_j)
        )
        for t in totals:
            out += _slab_new_log_unnorm(ctx, int(t))

    log_gamma = np.log(ctx.gamma)
    for k in range(r):
        totals = outcome.revived[k]
        n2 = len(totals)
        out += nb_log_pmf(n2, float(ctx.n_k[k]) - ctx.alpha, ctx.q)
        out += n2 * (np.log(ctx.theta_j) - log_gamma)
        for t in totals:
            out += _slab_new_log_unnorm(ctx, int(t))

    if ctx.is_new_group:
        if any(len(rep) for rep in outcome.repeats):
            raise ValidationError("a brand-new group has no repeats block")
        return float(out)

    if ctx.occurrences is None:
        raise ValidationError("repeats need occurrence-level training detail")
    for k in range(r):
        occ_k = ctx.occurrences[group][k]
        reps = outcome.repeats[k]
        if len(reps) != len(occ_k):
            raise ValidationError(
                f"feature {k}: {len(reps)} repeat counts for {len(occ_k)} occurrences"
            )
        for vec, a_new in zip(occ_k, reps):
            a_l = float(np.asarray(vec).sum())
            if ctx.target.is_poisson:
                out += nb_log_pmf(int(a_new), a_l - ctx.alpha_j, ctx.p_tilde)
            else:
                slab = ctx.target.slab
                assert isinstance(slab, BernoulliSBP)
                p = (a_l - slab.alpha) / (ctx.target.M + slab.beta)
                if a_new not in (0, 1):
                    return -np.inf
                out += np.log(p) if a_new else np.log1p(-p)
    return float(out)


def _check_doc(ctx: _Context, doc: TestDoc) -> None:
    if doc.counts.shape != (ctx.r,):
        raise ValidationError(
            f"document counts cover {doc.counts.shape} features, expected ({ctx.r},)"
        )


def log_predictive_aggregated(
    spec: HibpSpec,
    data: HibpDraw | AggregatedData,
    doc: TestDoc,
    group: int,
    latents: TestLatents,
    X: np.ndarray | None = None,
    new_group: GroupSpec | None = None,
) -> float:
    """Joint log-likelihood of an aggregated test document and its latent split.

    Support violations return ``-inf`` so the value can serve directly as
    a Gibbs target.
    """
    ctx = _resolve_context(spec, data, group, X, new_group)
    ctx.require_poisson("the aggregated predictive")
    _check_doc(ctx, doc)
    n_new = latents.n_new
    n_rev = latents.n_rev
    m_rev = latents.m_rev
    if n_new.shape != (len(doc.new_counts),):
        raise ValidationError("n_new must cover every new feature")
    if n_rev.shape != (ctx.r,) or m_rev.shape != (ctx.r,):
        raise ValidationError("n_rev and m_rev must cover every training feature")

    out = -ctx.phi
    if doc.new_counts:
        m_max = max(doc.new_counts)
        table = stirling_table(ctx.alpha_j, m_max)
        for m1, n1 in zip(doc.new_counts, n_new.tolist()):
            if not (1 <= n1 <= m1):
                return -np.inf
            out += ctx.new_feature_logweights(m1, table)[n1 - 1]

    c_max = int(doc.counts.max()) if ctx.r else 0
    table_k = stirling_table(ctx.alpha_j, max(c_max, 1))
    for k in range(ctx.r):
        c_k = int(doc.counts[k])
        n2, m2 = int(n_rev[k]), int(m_rev[k])
        if m2 > c_k or n2 < 0 or m2 < 0:
            return -np.inf
        out += nb_log_pmf(n2, float(ctx.n_k[k]) - ctx.alpha, ctx.q)
        out += sum_trunc_nb_log_pmf(m2, n2, ctx.alpha_j, ctx.p_tilde, table=table_k)
        out += nb_log_pmf(
            c_k - m2, float(ctx.m_j[k]) - float(ctx.n_j[k]) * ctx.alpha_j, ctx.p_tilde
        )
        if np.isneginf(out):
            return -np.inf
    return float(out)


def marginal_log_predictive(
    spec: HibpSpec,
    data: HibpDraw | AggregatedData,
    doc: TestDoc,
    group: int,
    X: np.ndarray | None = None,
    new_group: GroupSpec | None = None,
) -> float:
    """Exact log-probability of an aggregated test document in ``group``.

    The latent split factorizes over features, so each feature's latents
    are summed out exactly: new features over their occurrence count, old
    features over the (revived occurrences, revived counts) pair.  No
    Monte Carlo error is introduced.
    """
    ctx = _resolve_context(spec, data, group, X, new_group)
    ctx.require_poisson("the aggregated predictive")
    _check_doc(ctx, doc)

    out = -ctx.phi
    if doc.new_counts:
        table = stirling_table(ctx.alpha_j, max(doc.new_counts))
        for m1 in doc.new_counts:
            out += logsumexp(ctx.new_feature_logweights(m1, table))

    if ctx.r == 0:
        return float(out)
    c_max = int(doc.counts.max())
    table_k = stirling_table(ctx.alpha_j, max(c_max, 1))
    grid = ctx.split_grid(c_max, table_k)
    shapes3 = ctx.m_j - ctx.n_j * ctx.alpha_j
    support = np.arange(c_max + 1, dtype=np.int64)
    for k in range(ctx.r):
        c_k = int(doc.counts[k])
        nb1 = nb_log_pmf(support[: c_k + 1], float(ctx.n_k[k]) - ctx.alpha, ctx.q)
        nb3 = nb_log_pmf(support[: c_k + 1], float(shapes3[k]), ctx.p_tilde)
        w = (
            np.asarray(nb1)[None, :]
            + grid[: c_k + 1, : c_k + 1]
            + np.asarray(nb3)[::-1][:, None]
        )
        out += logsumexp(w)
    return float(out)


def mc_log_predictive(
    spec: HibpSpec,
    data: HibpDraw | AggregatedData,
    doc: TestDoc,
    group: int,
    rng: RngStream | np.random.Generator,
    X: np.ndarray | None = None,
    sweeps: int = 200,
    burnin: int = 50,
) -> tuple[float, float]:
    """Gibbs-averaged joint log-likelihood of a test document.

    Runs ``sweeps`` Gibbs sweeps over the test latents (discarding
    ``burnin``), averaging ``exp(log joint)`` across retained sweeps via
    log-sum-exp.  Returns ``(log average, variance of the retained log
    joints)`` so callers can report the Monte Carlo spread.  Note that
    :func:`marginal_log_predictive` computes the exact predictive
    probability directly; this estimator is kept for diagnostics.
    """
    if sweeps <= burnin:
        raise ValidationError("sweeps must exceed burnin")
    gen = as_generator(rng)
    state = init_test_latents(spec, data, doc, group, X=X)
    retained = []
    for it in range(sweeps):
        state = gibbs_test_latents(spec, data, doc, group, state, gen, X=X)
        if it >= burnin:
            retained.append(
                log_predictive_aggregated(spec, data, doc, group, state, X=X)
            )
    arr = np.asarray(retained)
    score = float(logsumexp(arr) - np.log(arr.size))
    return score, float(arr.var(ddof=1)) if arr.size > 1 else 0.0


def init_test_latents(
    spec: HibpSpec,
    data: HibpDraw | AggregatedData,
    doc: TestDoc,
    group: int,
    X: np.ndarray | None = None,
    new_group: GroupSpec | None = None,
) -> TestLatents:
    """A deterministic in-support starting point for the test-latent Gibbs."""
    ctx = _resolve_context(spec, data, group, X, new_group)
    ctx.require_poisson("the aggregated predictive")
    _check_doc(ctx, doc)
    n_new = np.ones(len(doc.new_counts), dtype=np.int64)
    n_rev = np.zeros(ctx.r, dtype=np.int64)
    m_rev = np.zeros(ctx.r, dtype=np.int64)
    forced = (doc.counts > 0) & (ctx.n_j == 0)
    n_rev[forced] = 1
    m_rev[forced] = doc.counts[forced]
    return TestLatents(n_new=n_new, n_rev=n_rev, m_rev=m_rev)


def _sample_from_logweights(
    logw: np.ndarray, gen: np.random.Generator
) -> int:
    logw = np.asarray(logw, dtype=float)
    norm = logsumexp(logw)
    if np.isneginf(norm):
        raise ValidationError("no latent configuration has positive probability")
    probs = np.exp(logw - norm)
    cdf = np.cumsum(probs)
    return int(np.searchsorted(cdf, gen.random() * cdf[-1], side="right"))


def gibbs_test_latents(
    spec: HibpSpec,
    data: HibpDraw | AggregatedData,
    doc: TestDoc,
    group: int,
    latents: TestLatents,
    rng: RngStream | np.random.Generator,
    X: np.ndarray | None = None,
    new_group: GroupSpec | None = None,
) -> TestLatents:
    """One Gibbs sweep over the test-document latents.

    New-feature occurrence counts are resampled from their exact discrete
    conditionals.  For each training feature the pair (revived
    occurrences, revived counts) is resampled jointly from its exact
    two-dimensional conditional; the pairwise block is required because
    the single-site conditionals cannot leave the all-zero corner once
    entered, which would break irreducibility.
    """
    ctx = _resolve_context(spec, data, group, X, new_group)
    ctx.require_poisson("the aggregated predictive")
    _check_doc(ctx, doc)
    gen = as_generator(rng)

    n_new = latents.n_new.copy()
    if doc.new_counts:
        table = stirling_table(ctx.alpha_j, max(doc.new_counts))
        for f, m1 in enumerate(doc.new_counts):
            logw = ctx.new_feature_logweights(m1, table)
            n_new[f] = 1 + _sample_from_logweights(logw, gen)

    n_rev = latents.n_rev.copy()
    m_rev = latents.m_rev.copy()
    if ctx.r:
        c_max = int(doc.counts.max())
        table_k = stirling_table(ctx.alpha_j, max(c_max, 1))
        grid = ctx.split_grid(c_max, table_k)
        shapes3 = ctx.m_j - ctx.n_j * ctx.alpha_j
        support = np.arange(c_max + 1, dtype=np.int64)
        for k in range(ctx.r):
            c_k = int(doc.counts[k])
            if c_k == 0 and ctx.n_j[k] == 0:
                n_rev[k] = 0
                m_rev[k] = 0
                continue
            nb1 = np.asarray(
                nb_log_pmf(support[: c_k + 1], float(ctx.n_k[k]) - ctx.alpha, ctx.q)
            )
            nb3 = np.asarray(nb_log_pmf(support[: c_k + 1], float(shapes3[k]), ctx.p_tilde))
            w = nb1[None, :] + grid[: c_k + 1, : c_k + 1] + nb3[::-1][:, None]
            flat = _sample_from_logweights(w.ravel(), gen)
            m2, n2 = divmod(flat, c_k + 1)
            n_rev[k] = n2
            m_rev[k] = m2
    return TestLatents(n_new=n_new, n_rev=n_rev, m_rev=m_rev)


@dataclass
class ClassifyResult:
    """Outcome of posterior-averaged predictive classification."""

    group: int
    log_scores: np.ndarray
    per_sample: np.ndarray

    @property
    def score_spread(self) -> np.ndarray:
        """Per-group variance of the per-sample log-predictives."""
        if self.per_sample.shape[0] > 1:
            return self.per_sample.var(axis=0, ddof=1)
        return np.zeros(self.per_sample.shape[1])


def classify(
    samples: Sequence[tuple[HibpSpec, np.ndarray]],
    data: AggregatedData,
    doc: TestDoc,
) -> ClassifyResult:
    """Assign a test document to the group with the highest predictive score.

    ``samples`` holds posterior draws as (model parameters, latent
    occurrence matrix) pairs; each group's score is the log of the average
    predictive probability across samples.  Ties break toward the lowest
    group index.
    """
    if len(samples) == 0:
        raise ValidationError("classification needs at least one posterior sample")
    n_groups = samples[0][0].n_groups
    per_sample = np.empty((len(samples), n_groups))
    for s, (spec_s, X_s) in enumerate(samples):
        for j in range(n_groups):
            per_sample[s, j] = marginal_log_predictive(spec_s, data, doc, j, X=X_s)
    log_scores = logsumexp(per_sample, axis=0) - np.log(len(samples))
    return ClassifyResult(
        group=int(np.argmax(log_scores)),
        log_scores=log_scores,
        per_sample=per_sample,
    )


def overlap(X: np.ndarray) -> float:
    """Mean over group pairs of the fraction of features present in both."""
    X = np.asarray(X)
    if X.ndim != 2:
        raise ParameterError("X must be a (groups, features) matrix")
    n_groups, r = X.shape
    if n_groups < 2:
        raise ParameterError("overlap needs at least two groups")
    if r == 0:
        raise ParameterError("overlap needs at least one feature")
    present = X > 0
    total = 0.0
    n_pairs = 0
    for j in range(n_groups):
        for jp in range(j + 1, n_groups):
            total += float(np.mean(present[j] & present[jp]))
            n_pairs += 1
    return total / n_pairs
