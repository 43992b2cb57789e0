"""Posterior representations of the latent random measures given count data.

Observing a draw tilts every GG process exponentially and pins a Gamma
(or Beta) jump at each observed atom; the unobserved remainder stays a GG
process with an increased ``zeta``.  Posterior objects therefore carry only
parameters: tilted GG parameter sets plus per-atom jump laws.  Downstream
consumers (prediction, likelihoods) never need realized infinite series —
all their closed forms depend on the tilted processes through Laplace
exponents alone.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .countdists import RngStream, as_generator
from .ggmath import BernoulliSBP, GGParams, ParameterError, PoissonSlab
from .hibp import AggregatedData, HibpDraw, HibpSpec, ValidationError
from .hhibp import HhibpDraw, HhibpSpec

__all__ = [
    "GammaLaw",
    "BetaLaw",
    "PosteriorHibp",
    "PosteriorHhibp",
    "PosteriorJumps",
    "HhibpPosteriorJumps",
    "posterior_hibp",
    "posterior_hhibp",
    "sample_posterior_jumps",
]


@dataclass(frozen=True)
class GammaLaw:
    """Gamma(shape, rate); ``shape == 0`` degenerates to a point mass at 0."""

    shape: float
    rate: float

    def __post_init__(self) -> None:
        if self.shape < 0.0 or not np.isfinite(self.shape):
            raise ParameterError(f"shape={self.shape!r} must be finite and >= 0")
        if self.rate <= 0.0 or not np.isfinite(self.rate):
            raise ParameterError(f"rate={self.rate!r} must be finite and > 0")

    @property
    def mean(self) -> float:
        return self.shape / self.rate

    def sample(self, rng: RngStream | np.random.Generator, size: int | None = None):
        gen = as_generator(rng)
        return gen.gamma(self.shape, 1.0 / self.rate, size=size)


@dataclass(frozen=True)
class BetaLaw:
    """Beta(a, b) on (0, 1)."""

    a: float
    b: float

    def __post_init__(self) -> None:
        if self.a <= 0.0 or self.b <= 0.0:
            raise ParameterError(f"Beta parameters ({self.a!r}, {self.b!r}) must be > 0")

    @property
    def mean(self) -> float:
        return self.a / (self.a + self.b)

    def sample(self, rng: RngStream | np.random.Generator, size: int | None = None):
        gen = as_generator(rng)
        return gen.beta(self.a, self.b, size=size)


@dataclass(frozen=True)
class PosteriorHibp:
    """Posterior of the two-level model given occurrence latents.

    ``tilted_baseline`` is the prior baseline with ``zeta`` increased by
    the total dish rate.  ``feature_jumps[k]`` is the Gamma law of the
    baseline jump at observed feature ``k``.  ``slab_totals[j][k]`` is the
    Gamma law of the summed slab jump for a Poisson group's cell (``None``
    for Bernoulli groups); ``slab_jumps[j][k][l]`` are per-occurrence laws,
    present only when occurrence-level detail was available.
    """

    spec: HibpSpec
    X: np.ndarray
    tilted_baseline: GGParams
    feature_jumps: tuple[GammaLaw, ...]
    slab_totals: tuple[tuple[GammaLaw, ...] | None, ...]
    slab_jumps: tuple[tuple[tuple[GammaLaw | BetaLaw, ...], ...], ...] | None

    @property
    def n_features(self) -> int:
        return len(self.feature_jumps)

    @property
    def zeta_tilted(self) -> float:
        return self.tilted_baseline.zeta


@dataclass(frozen=True)
class PosteriorHhibp:
    """Posterior of the three-level model given a full draw.

    ``feature_jumps[k]`` are baseline jumps; ``category_jumps[j][k][l]``
    are the category-level jumps, one per category occurrence;
    ``subgroup_jumps[j][d][k][t]`` are slab jumps per subgroup occurrence.
    """

    spec: HhibpSpec
    Xhat: np.ndarray
    tilted_baseline: GGParams
    tilted_categories: tuple[GGParams, ...]
    feature_jumps: tuple[GammaLaw, ...]
    category_jumps: tuple[tuple[tuple[GammaLaw, ...], ...], ...]
    subgroup_jumps: tuple[tuple[tuple[tuple[GammaLaw | BetaLaw, ...], ...], ...], ...] | None

    @property
    def n_features(self) -> int:
        return len(self.feature_jumps)


def _poisson_group_laws(
    group, m_row: np.ndarray, n_row: np.ndarray
) -> tuple[GammaLaw, ...]:
    rate = group.slab.beta * group.M + group.prior.zeta
    alpha_j = group.prior.alpha
    return tuple(
        GammaLaw(float(m) - float(n) * alpha_j, rate)
        for m, n in zip(m_row.tolist(), n_row.tolist())
    )


def _occurrence_laws(group, occ_k: list[np.ndarray]) -> tuple[GammaLaw | BetaLaw, ...]:
    if group.is_poisson:
        assert isinstance(group.slab, PoissonSlab) and group.prior is not None
        rate = group.slab.beta * group.M + group.prior.zeta
        return tuple(
            GammaLaw(float(np.asarray(v).sum()) - group.prior.alpha, rate)
            for v in occ_k
        )
    assert isinstance(group.slab, BernoulliSBP)
    slab = group.slab
    return tuple(
        BetaLaw(
            float(np.asarray(v).sum()) - slab.alpha,
            group.M - float(np.asarray(v).sum()) + slab.beta + slab.alpha,
        )
        for v in occ_k
    )


def posterior_hibp(
    spec: HibpSpec,
    data: HibpDraw | AggregatedData,
    X: np.ndarray | None = None,
) -> PosteriorHibp:
    """Posterior object for the two-level model.

    ``data`` is either a full draw (its own latents are used) or
    aggregated counts, in which case the latent occurrence matrix ``X``
    must be supplied — typically the current Gibbs state.
    """
    if isinstance(data, HibpDraw):
        if X is not None:
            raise ValidationError("X is taken from the draw; do not pass it separately")
        X_arr = np.asarray(data.X, dtype=np.int64)
        agg = np.asarray(data.agg, dtype=np.int64)
        occurrences = data.occurrences
    elif isinstance(data, AggregatedData):
        if X is None:
            raise ValidationError(
                "aggregated data needs the latent occurrence matrix X"
            )
        X_arr = np.asarray(X, dtype=np.int64)
        agg = data.agg
        occurrences = None
    else:
        raise ValidationError(f"unsupported data object {type(data)!r}")

    n_groups = spec.n_groups
    if X_arr.shape != agg.shape or X_arr.shape[0] != n_groups:
        raise ValidationError(
            f"X shape {X_arr.shape} does not match counts shape {agg.shape}"
        )
    if np.any(X_arr < 0) or np.any(X_arr > agg):
        raise ValidationError("latents must satisfy 0 <= X <= counts")
    if np.any((X_arr == 0) & (agg > 0)):
        raise ValidationError("cells with counts need at least one occurrence")
    r = X_arr.shape[1]
    n_k = X_arr.sum(axis=0)
    if r and np.any(n_k == 0):
        raise ValidationError("every observed feature needs at least one occurrence")

    kappa = spec.total_dish_rate()
    tilted = spec.baseline.tilted(kappa)
    zeta_tilt = tilted.zeta
    alpha = spec.baseline.alpha
    feature_jumps = tuple(
        GammaLaw(float(n) - alpha, zeta_tilt) for n in n_k.tolist()
    )

    slab_totals: list[tuple[GammaLaw, ...] | None] = []
    for j, group in enumerate(spec.groups):
        if group.is_poisson:
            slab_totals.append(_poisson_group_laws(group, agg[j], X_arr[j]))
        else:
            slab_totals.append(None)

    slab_jumps: tuple | None = None
    if occurrences is not None:
        slab_jumps = tuple(
            tuple(_occurrence_laws(group, occurrences[j][k]) for k in range(r))
            for j, group in enumerate(spec.groups)
        )

    return PosteriorHibp(
        spec=spec,
        X=X_arr,
        tilted_baseline=tilted,
        feature_jumps=feature_jumps,
        slab_totals=tuple(slab_totals),
        slab_jumps=slab_jumps,
    )


def posterior_hhibp(spec: HhibpSpec, draw: HhibpDraw) -> PosteriorHhibp:
    """Posterior object for the three-level model given a full draw."""
    Xhat = np.asarray(draw.Xhat, dtype=np.int64)
    r = draw.r
    if Xhat.shape != (spec.n_categories, r):
        raise ValidationError(
            f"Xhat shape {Xhat.shape} != ({spec.n_categories}, {r})"
        )
    n_k = Xhat.sum(axis=0)
    if r and np.any(n_k == 0):
        raise ValidationError("every observed feature needs at least one occurrence")

    kappa0 = spec.total_category_rate()
    tilted0 = spec.baseline.tilted(kappa0)
    alpha = spec.baseline.alpha
    feature_jumps = tuple(
        GammaLaw(float(n) - alpha, tilted0.zeta) for n in n_k.tolist()
    )

    tilted_cats = []
    category_jumps = []
    for j, cat in enumerate(spec.categories):
        t_j = spec.category_input(j)
        tilted_j = cat.tilted(t_j)
        tilted_cats.append(tilted_j)
        laws_j = []
        for k in range(r):
            rows = np.asarray(draw.C[j][k], dtype=np.int64)
            totals = rows.sum(axis=1) if rows.size else np.zeros(0, dtype=np.int64)
            laws_j.append(
                tuple(
                    GammaLaw(float(c) - cat.alpha, tilted_j.zeta)
                    for c in totals.tolist()
                )
            )
        category_jumps.append(tuple(laws_j))

    subgroup_jumps: tuple | None = None
    if draw.occurrences is not None:
        subgroup_jumps = tuple(
            tuple(
                tuple(
                    _occurrence_laws(subgroup, draw.occurrences[j][d][k])
                    for k in range(r)
                )
                for d, subgroup in enumerate(spec.subgroups[j])
            )
            for j in range(spec.n_categories)
        )

    return PosteriorHhibp(
        spec=spec,
        Xhat=Xhat,
        tilted_baseline=tilted0,
        tilted_categories=tuple(tilted_cats),
        feature_jumps=feature_jumps,
        category_jumps=tuple(category_jumps),
        subgroup_jumps=subgroup_jumps,
    )


@dataclass
class PosteriorJumps:
    """Realized jumps of a two-level posterior.

    ``slab_totals[j][k]`` is the summed slab jump of a Poisson group's
    cell (``nan`` for Bernoulli groups, whose jumps do not aggregate);
    ``slabs[j][k]`` holds per-occurrence draws when the posterior carried
    occurrence-level laws.
    """

    features: np.ndarray
    slab_totals: np.ndarray
    slabs: list[list[np.ndarray]] | None


@dataclass
class HhibpPosteriorJumps:
    """Realized jumps of a three-level posterior."""

    features: np.ndarray
    category: list[list[np.ndarray]]
    subgroup: list[list[list[np.ndarray]]] | None


def _sample_jump_row(laws, gen: np.random.Generator) -> np.ndarray:
    return np.array([law.sample(gen) for law in laws], dtype=float)


def sample_posterior_jumps(
    post: PosteriorHibp | PosteriorHhibp,
    rng: RngStream | np.random.Generator,
) -> PosteriorJumps | HhibpPosteriorJumps:
    """Draw one joint realization of all fixed-atom jumps.

    Randomness is consumed in a fixed documented order: feature jumps
    first, then group by group (and subgroup by subgroup), feature by
    feature, occurrence by occurrence.
    """
    gen = as_generator(rng)
    if isinstance(post, PosteriorHibp):
        r = post.n_features
        features = np.array(
            [law.sample(gen) for law in post.feature_jumps], dtype=float
        )
        n_groups = post.spec.n_groups
        totals = np.full((n_groups, r), np.nan)
        slabs: list[list[np.ndarray]] | None = None
        if post.slab_jumps is not None:
            slabs = []
            for j in range(n_groups):
                rows = [_sample_jump_row(post.slab_jumps[j][k], gen) for k in range(r)]
                slabs.append(rows)
                if post.slab_totals[j] is not None:
                    for k in range(r):
                        totals[j, k] = rows[k].sum()
        else:
            for j in range(n_groups):
                laws = post.slab_totals[j]
                if laws is not None:
                    totals[j] = [law.sample(gen) for law in laws]
        return PosteriorJumps(features=features, slab_totals=totals, slabs=slabs)

    if isinstance(post, PosteriorHhibp):
        features = np.array(
            [law.sample(gen) for law in post.feature_jumps], dtype=float
        )
        r = post.n_features
        category = [
            [_sample_jump_row(post.category_jumps[j][k], gen) for k in range(r)]
            for j in range(post.spec.n_categories)
        ]
        subgroup: list[list[list[np.ndarray]]] | None = None
        if post.subgroup_jumps is not None:
            subgroup = [
                [
                    [_sample_jump_row(post.subgroup_jumps[j][d][k], gen) for k in range(r)]
                    for d in range(len(post.spec.subgroups[j]))
                ]
                for j in range(post.spec.n_categories)
            ]
        return HhibpPosteriorJumps(features=features, category=category, subgroup=subgroup)

    raise ValidationError(f"unsupported posterior object {type(post)!r}")
