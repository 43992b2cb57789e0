"""Two-level hierarchical feature allocation: sampling and marginal likelihoods.

The generative story implemented here:

1. A Poisson number of distinct features is drawn; its rate couples a
   baseline GG measure with the per-group new-dish rates.
2. Each feature receives a vector of per-group occurrence counts from a
   multivariate mixed zero-truncated Poisson (MtP) law.
3. Every occurrence of a feature in a group spreads counts over that
   group's documents through the group's slab: per-document Poisson counts
   conditioned to a positive total, or Bernoulli inclusions under a
   stable-Beta process.

Likelihood conventions (applied consistently everywhere in this package):
the feature labels are opaque sequential integers, the label density and
the ``1/r!`` ordering factor are dropped, so all reported log marginals are
densities over ordered feature lists.  Every ratio used by MH, Gibbs, and
classification cancels these factors exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .countdists import (
    RngStream,
    as_generator,
    sample_mixing_rate,
    tpoisson_sample,
    trbinom_sb_sample,
)
from .ggmath import (
    BernoulliSBP,
    GGParams,
    ParameterError,
    PoissonSlab,
    SlabSpec,
    laplace_exponent,
    laplace_exponent_raw,
    new_dish_rate,
    stirling_table,
)

__all__ = [
    "GroupSpec",
    "HibpSpec",
    "HibpDraw",
    "AggregatedData",
    "ValidationError",
    "sample_hibp",
    "sample_slab_vector",
    "log_marginal_full",
    "log_marginal_aggregated",
    "aggregated_from_draw",
]


class ValidationError(ValueError):
    """Structured data failed a consistency check."""


@dataclass(frozen=True)
class GroupSpec:
    """One observation group: a slab family, document count, and prior.

    ``prior`` must be a :class:`GGParams` for Poisson slabs and ``None``
    for Bernoulli stable-Beta slabs (which embed their own prior).
    """

    slab: SlabSpec
    M: int
    prior: GGParams | None = None

    def __post_init__(self) -> None:
        if self.M < 0:
            raise ParameterError(f"document count M={self.M!r} must be >= 0")
        if isinstance(self.slab, PoissonSlab):
            if self.prior is None:
                raise ParameterError("Poisson-slab groups require a GG prior")
        elif self.prior is not None:
            raise ParameterError("Bernoulli stable-Beta groups embed their own prior")

    @property
    def is_poisson(self) -> bool:
        return isinstance(self.slab, PoissonSlab)

    def dish_rate(self) -> float:
        """New-dish rate of the group after its ``M`` documents."""
        return new_dish_rate(self.prior, self.slab, self.M)


@dataclass(frozen=True)
class HibpSpec:
    """Full two-level model specification."""

    baseline: GGParams
    groups: tuple[GroupSpec, ...]
    gamma0: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "groups", tuple(self.groups))
        if len(self.groups) == 0:
            raise ParameterError("at least one group is required")
        if not np.isfinite(self.gamma0) or self.gamma0 <= 0.0:
            raise ParameterError(f"gamma0={self.gamma0!r} must be finite and > 0")

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def mass0(self) -> float:
        """Baseline mass: the product ``gamma0 * theta``."""
        return self.gamma0 * self.baseline.theta

    def dish_rates(self) -> np.ndarray:
        return np.array([g.dish_rate() for g in self.groups])

    def total_dish_rate(self) -> float:
        return float(self.dish_rates().sum())

    def expected_features(self) -> float:
        """Mean number of distinct features across all groups."""
        return self.mass0 * laplace_exponent(self.baseline, self.total_dish_rate())


@dataclass
class HibpDraw:
    """One realization of the two-level model.

    Attributes
    ----------
    r:
        Number of distinct features.  Features carry opaque sequential
        labels ``0 .. r-1``.
    X:
        ``(n_groups, r)`` integer matrix of per-group occurrence counts.
    doc_counts:
        Per group, an ``(M_j, r)`` matrix of per-document counts summed
        over occurrences.
    agg:
        ``(n_groups, r)`` matrix of counts summed over documents as well.
    occurrences:
        Optional occurrence-level detail: ``occurrences[j][k]`` is a list
        of ``X[j, k]`` per-document count vectors of length ``M_j``.  Kept
        only when requested at sampling time (or required by a caller).
    """

    r: int
    X: np.ndarray
    doc_counts: list[np.ndarray]
    agg: np.ndarray
    occurrences: list[list[list[np.ndarray]]] | None = None

    @property
    def features(self) -> list[int]:
        return list(range(self.r))

    def feature_totals(self) -> np.ndarray:
        """Occurrence totals per feature across groups (column sums of X)."""
        return self.X.sum(axis=0)


@dataclass
class AggregatedData:
    """Observed data kept at group-aggregated (and optionally per-document) level."""

    M: tuple[int, ...]
    agg: np.ndarray
    doc_counts: list[np.ndarray] | None = None

    def __post_init__(self) -> None:
        self.M = tuple(int(m) for m in self.M)
        self.agg = np.asarray(self.agg, dtype=np.int64)
        if self.agg.ndim != 2 or self.agg.shape[0] != len(self.M):
            raise ValidationError(
                f"aggregated counts have shape {self.agg.shape}, expected ({len(self.M)}, r)"
            )
        if np.any(self.agg < 0):
            raise ValidationError("aggregated counts must be >= 0")
        if self.agg.shape[1] and np.any(self.agg.sum(axis=0) == 0):
            raise ValidationError("every feature must have a positive total count")

    @property
    def n_features(self) -> int:
        return int(self.agg.shape[1])


def aggregated_from_draw(draw: HibpDraw, spec: HibpSpec) -> AggregatedData:
    """Project a draw down to its observable aggregated counts."""
    return AggregatedData(
        M=tuple(g.M for g in spec.groups),
        agg=draw.agg.copy(),
        doc_counts=[d.copy() for d in draw.doc_counts],
    )


def sample_slab_vector(
    group: GroupSpec,
    rng: RngStream | np.random.Generator,
    size: int | None = None,
) -> np.ndarray:
    """Sample per-document count vectors for occurrences of one feature.

    Returns an ``(size, M)`` integer matrix (``(M,)`` when ``size`` is
    None) whose rows are nonzero.  Poisson slabs draw a tilted mixing rate,
    a zero-truncated Poisson total, and split it uniformly-multinomially
    across documents; Bernoulli slabs draw a conditioned-positive
    stable-Beta binomial total and place it on a uniform random subset of
    documents.
    """
    if group.M < 1:
        raise ParameterError("slab vectors require at least one document")
    gen = as_generator(rng)
    n = 1 if size is None else int(size)
    m_docs = group.M
    if group.is_poisson:
        assert isinstance(group.slab, PoissonSlab) and group.prior is not None
        kappa = group.slab.beta * m_docs
        rates = sample_mixing_rate(kappa, group.prior, gen, size=n)
        totals = tpoisson_sample(kappa * np.asarray(rates), gen)
        vectors = gen.multinomial(totals, np.full(m_docs, 1.0 / m_docs))
    else:
        assert isinstance(group.slab, BernoulliSBP)
        totals = trbinom_sb_sample(m_docs, group.slab.alpha, group.slab.beta, gen, size=n)
        totals = np.atleast_1d(np.asarray(totals))
        if m_docs == 1:
            vectors = np.ones((n, 1), dtype=np.int64)
        else:
            u = gen.random((n, m_docs))
            order = np.sort(u, axis=1)
            thresholds = order[np.arange(n), totals - 1]
            vectors = (u <= thresholds[:, None]).astype(np.int64)
    if size is None:
        return vectors[0]
    return vectors


def sample_hibp(
    spec: HibpSpec,
    rng: RngStream | np.random.Generator,
    keep_occurrences: bool = False,
) -> HibpDraw:
    """Sample one full realization of the two-level model.

    Randomness is consumed in a fixed order: the feature count, then all
    feature occurrence vectors at once, then the slab draws group by group
    (occurrences ordered by feature label).
    """
    gen = as_generator(rng)
    rates = spec.dish_rates()
    kappa = float(rates.sum())
    r = int(gen.poisson(spec.expected_features()))
    n_groups = spec.n_groups

    if r == 0:
        X = np.zeros((n_groups, 0), dtype=np.int64)
    else:
        mix_rates = sample_mixing_rate(kappa, spec.baseline, gen, size=r)
        totals = tpoisson_sample(kappa * np.asarray(mix_rates), gen)
        X = gen.multinomial(totals, rates / kappa).T.astype(np.int64)

    doc_counts: list[np.ndarray] = []
    occurrences: list[list[list[np.ndarray]]] | None = [] if keep_occurrences else None
    for j, group in enumerate(spec.groups):
        counts_j = np.zeros((group.M, r), dtype=np.int64)
        occ_j: list[list[np.ndarray]] = [[] for _ in range(r)]
        n_occ = int(X[j].sum())
        if n_occ > 0:
            vectors = sample_slab_vector(group, gen, size=n_occ)
            owners = np.repeat(np.arange(r), X[j])
            for row, k in enumerate(owners):
                counts_j[:, k] += vectors[row]
                if keep_occurrences:
                    occ_j[int(k)].append(vectors[row].copy())
        doc_counts.append(counts_j)
        if keep_occurrences:
            assert occurrences is not None
            occurrences.append(occ_j)
    agg = np.stack([c.sum(axis=0) for c in doc_counts])
    return HibpDraw(r=r, X=X, doc_counts=doc_counts, agg=agg, occurrences=occurrences)


def _validate_draw(spec: HibpSpec, draw: HibpDraw) -> None:
    n_groups = spec.n_groups
    if draw.X.shape != (n_groups, draw.r):
        raise ValidationError(
            f"X has shape {draw.X.shape}, expected ({n_groups}, {draw.r})"
        )
    if np.any(draw.X < 0):
        raise ValidationError("occurrence counts must be >= 0")
    if draw.r and np.any(draw.X.sum(axis=0) == 0):
        raise ValidationError("every feature must occur in at least one group")
    if draw.occurrences is None:
        raise ValidationError("occurrence-level detail is required here")
    if len(draw.occurrences) != n_groups:
        raise ValidationError("occurrence lists must cover every group")
    for j, group in enumerate(spec.groups):
        occ_j = draw.occurrences[j]
        if len(occ_j) != draw.r:
            raise ValidationError(f"group {j}: occurrence lists must cover every feature")
        for k in range(draw.r):
            if len(occ_j[k]) != int(draw.X[j, k]):
                raise ValidationError(
                    f"group {j}, feature {k}: {len(occ_j[k])} occurrence vectors "
                    f"but X says {int(draw.X[j, k])}"
                )
            for vec in occ_j[k]:
                v = np.asarray(vec)
                if v.shape != (group.M,):
                    raise ValidationError(
                        f"group {j}, feature {k}: occurrence vector of length {v.shape} "
                        f"!= document count {group.M}"
                    )
                if np.any(v < 0) or int(v.sum()) == 0:
                    raise ValidationError(
                        f"group {j}, feature {k}: occurrence vectors must be "
                        "nonnegative with a positive total"
                    )
                if not group.is_poisson and np.any(v > 1):
                    raise ValidationError(
                        f"group {j}, feature {k}: Bernoulli slabs produce 0/1 entries"
                    )


def log_marginal_full(spec: HibpSpec, draw: HibpDraw) -> float:
    """Log marginal likelihood of a fully observed draw (occurrence level).

    Ordered-feature-list density with the label factors dropped, as
    described in the module docstring.  Structural inconsistencies in the
    draw raise :class:`ValidationError`.
    """
    _validate_draw(spec, draw)
    baseline = spec.baseline
    alpha, zeta = baseline.alpha, baseline.zeta
    kappa = spec.total_dish_rate()
    out = -spec.mass0 * laplace_exponent(baseline, kappa)
    if draw.r == 0:
        return float(out)

    n_k = draw.feature_totals().astype(float)
    n_total = float(n_k.sum())
    out += draw.r * np.log(spec.mass0)
    out += -(n_total - draw.r * alpha) * np.log(kappa + zeta)
    out += float(np.sum(gammaln(n_k - alpha))) - draw.r * gammaln(1.0 - alpha)

    for j, group in enumerate(spec.groups):
        n_j = draw.X[j].astype(float)
        occ_j = draw.occurrences[j]  # type: ignore[index]
        if group.is_poisson:
            assert isinstance(group.slab, PoissonSlab) and group.prior is not None
            beta = group.slab.beta
            alpha_j = group.prior.alpha
            denom = beta * group.M + group.prior.zeta
            theta_j = group.prior.theta
            out += float(np.sum(n_j * np.log(theta_j) - gammaln(n_j + 1.0)))
            for k in range(draw.r):
                for vec in occ_j[k]:
                    v = np.asarray(vec, dtype=np.int64)
                    a = float(v.sum())
                    out += (
                        a * np.log(beta)
                        - (a - alpha_j) * np.log(denom)
                        + gammaln(a - alpha_j)
                        - gammaln(1.0 - alpha_j)
                        - float(np.sum(gammaln(v + 1.0)))
                    )
        else:
            assert isinstance(group.slab, BernoulliSBP)
            slab = group.slab
            out += float(np.sum(n_j * np.log(slab.theta) - gammaln(n_j + 1.0)))
            for k in range(draw.r):
                for vec in occ_j[k]:
                    m = float(np.asarray(vec).sum())
                    out += (
                        gammaln(m - slab.alpha)
                        + gammaln(group.M - m + slab.beta + slab.alpha)
                        - gammaln(group.M + slab.beta)
                    )
    return float(out)


def log_marginal_aggregated(
    spec: HibpSpec,
    agg: np.ndarray | AggregatedData,
    X: np.ndarray,
) -> float:
    """Log marginal likelihood of group-aggregated counts and latent occurrences.

    ``agg`` holds the observed per-group, per-feature totals and ``X`` the
    latent occurrence counts.  Only Poisson-slab groups are supported at
    the aggregated level; the per-occurrence composition collapses into
    generalized Stirling numbers.  Support violations (counts without
    occurrences, occurrences exceeding counts, features with no
    occurrences anywhere) return ``-inf`` so samplers can use this as a
    target density directly.
    """
    if isinstance(agg, AggregatedData):
        agg = agg.agg
    agg = np.asarray(agg, dtype=np.int64)
    X = np.asarray(X, dtype=np.int64)
    n_groups = spec.n_groups
    if agg.ndim != 2 or agg.shape[0] != n_groups:
        raise ValidationError(f"agg has shape {agg.shape}, expected ({n_groups}, r)")
    if X.shape != agg.shape:
        raise ValidationError(f"X has shape {X.shape}, expected {agg.shape}")
    if np.any(agg < 0) or np.any(X < 0):
        raise ValidationError("counts must be >= 0")
    for group in spec.groups:
        if not group.is_poisson:
            raise ValidationError(
                "aggregated marginals are implemented for Poisson-slab groups only"
            )

    r = int(agg.shape[1])
    baseline = spec.baseline
    alpha, zeta = baseline.alpha, baseline.zeta
    kappa = spec.total_dish_rate()
    out = -spec.mass0 * laplace_exponent(baseline, kappa)
    if r == 0:
        return float(out)

    if np.any(X > agg) or np.any((X == 0) & (agg > 0)) or np.any((X > 0) & (agg == 0)):
        return -np.inf
    n_k = X.sum(axis=0).astype(float)
    if np.any(n_k == 0):
        return -np.inf

    n_total = float(n_k.sum())
    out += r * np.log(spec.mass0)
    out += -(n_total - r * alpha) * np.log(kappa + zeta)
    out += float(np.sum(gammaln(n_k - alpha))) - r * gammaln(1.0 - alpha)

    for j, group in enumerate(spec.groups):
        assert isinstance(group.slab, PoissonSlab) and group.prior is not None
        m_j = agg[j]
        n_j = X[j]
        cells = m_j > 0
        if not np.any(cells):
            continue
        m = m_j[cells].astype(float)
        n = n_j[cells].astype(float)
        alpha_j = group.prior.alpha
        rate = group.slab.beta * group.M
        denom = rate + group.prior.zeta
        table = stirling_table(alpha_j, int(m.max()), int(n_j[cells].max()))
        log_s = table[m_j[cells], n_j[cells]]
        if np.any(np.isneginf(log_s)):
            return -np.inf
        out += float(
            np.sum(
                n * np.log(group.prior.theta)
                + m * np.log(rate)
                - (m - alpha_j * n) * np.log(denom)
                + log_s
                - gammaln(m + 1.0)
            )
        )
    return float(out)
