"""MCMC posterior inference for the Poisson-slab two-level model.

The sampler alternates two kernels:

* a blocked Gibbs sweep over the latent occurrence matrix ``X`` — within
  one group, cells are conditionally independent given the other groups'
  rows, so a whole row resamples in parallel from its exact discrete
  conditionals;
* a partially collapsed Metropolis-Hastings pass over the free
  hyperparameters on an unconstrained scale.  The baseline mass
  ``theta0`` enters the likelihood as ``theta0^r exp(-theta0 * Psi)``,
  so under its scale-invariant prior it integrates out to
  ``Gamma(r) / Psi^r``: every MH block targets that collapsed posterior
  (removing the strong ``theta0``–``alpha`` ridge), and the pass ends by
  redrawing ``theta0`` exactly from its ``Gamma(r, Psi)`` conditional.
  The baseline discount ``t(alpha)`` updates every call; each group
  contributes a cheap ``log theta_j``-only block every call and a joint
  ``(log theta_j, t(alpha_j))`` block on a fixed cadence
  (``alpha_every``), because changing ``alpha_j`` forces a fresh
  generalized-Stirling table.  Robbins-Monro step adaptation runs during
  burn-in only.

``zeta``, each group's ``zeta_j``, and each ``beta_j`` stay fixed at the
template's values.  ``theta`` coordinates move as ``log theta``;
``alpha`` coordinates move through a scaled logit mapping onto
``(ALPHA_MIN, 1)``.  The prior is flat on ``log theta0`` and independent
``N(0, PRIOR_SCALE**2)`` on every other transformed coordinate.  A fully
flat prior would leave the posterior improper in two directions: the
likelihood tends to a positive constant both in the tails of the
``alpha`` transforms and along the ray that scales every group mass
``theta_j`` up together (latents and ``theta0`` compensate, so the data
cannot pin the common scale).  The wide Gaussian restores integrability
and a restoring force on those plateaus while perturbing
likelihood-dominated directions by well under a tenth of a nat.  These
choices (and the step sizes) are reported in
:attr:`ChainSummary.metadata` so downstream consumers see them as
artifact settings, not model content.

Likelihood evaluations reuse cached per-group terms: a ``theta``-only
proposal rescales one group's dish rate and re-adds a handful of
scalars, a joint proposal rebuilds one group's banded Stirling lookups,
and only a Gibbs sweep (which moves every latent) triggers a full
recompute.  The cached total always equals
:func:`~hibp_lab.hibp.log_marginal_aggregated` up to float rounding.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, gammaln, logit

from .countdists import RngStream
from .ggmath import (
    ALPHA_MAX,
    GGParams,
    ParameterError,
    laplace_exponent_raw,
    stirling_table,
)
from .hibp import AggregatedData, GroupSpec, HibpSpec, ValidationError

__all__ = [
    "ALPHA_MIN",
    "DiagnosticError",
    "ChainState",
    "ChainSummary",
    "transform_alpha",
    "inverse_transform_alpha",
    "hypers_from_spec",
    "spec_from_hypers",
    "hyper_names",
    "init_chain_state",
    "gibbs_sweep_X",
    "mh_step_hypers",
    "run_chains",
    "gibbs_latents",
    "gelman_rubin",
]

ALPHA_MIN = -5.0
PRIOR_SCALE = 4.0
_ADAPT_TARGET = 0.3
_INIT_STEP = 0.25
_INIT_SPREAD = 1.5


class DiagnosticError(ValueError):
    """A convergence diagnostic is undefined for the given chains."""


def transform_alpha(alpha: float) -> float:
    """Map ``alpha`` in (ALPHA_MIN, 1) to the unconstrained scale."""
    if not (ALPHA_MIN < alpha < 1.0):
        raise ParameterError(f"alpha={alpha!r} outside ({ALPHA_MIN}, 1)")
    return float(logit((alpha - ALPHA_MIN) / (1.0 - ALPHA_MIN)))


def inverse_transform_alpha(t: float) -> float:
    """Inverse of :func:`transform_alpha`; lands strictly inside the domain.

    Extreme arguments would underflow onto the boundary (``expit`` hits
    exactly 0 or 1 around ``|t| > 745``), so the result is clamped a hair
    inside the open interval; this keeps recorded values round-trippable.
    """
    alpha = ALPHA_MIN + (1.0 - ALPHA_MIN) * expit(t)
    return float(np.clip(alpha, ALPHA_MIN + 1e-12, 1.0 - 1e-12))


def hyper_names(n_groups: int) -> list[str]:
    names = ["theta0", "alpha"]
    for j in range(n_groups):
        names += [f"theta_{j + 1}", f"alpha_{j + 1}"]
    return names


def hypers_from_spec(spec: HibpSpec) -> np.ndarray:
    """Transformed hyperparameter vector of a Poisson-slab model."""
    _require_poisson(spec)
    out = [np.log(spec.mass0), transform_alpha(spec.baseline.alpha)]
    for group in spec.groups:
        out += [np.log(group.prior.theta), transform_alpha(group.prior.alpha)]
    return np.array(out)


def spec_from_hypers(template: HibpSpec, hypers: np.ndarray) -> HibpSpec:
    """Rebuild a spec from the template's fixed parts and free hypers.

    The template supplies ``zeta``, per-group ``zeta_j`` and ``beta_j``,
    and document counts; ``hypers`` supplies ``log theta0``, transformed
    ``alpha``, and each group's pair.  ``gamma0`` is absorbed into
    ``theta0`` (only their product enters any formula).
    """
    _require_poisson(template)
    hypers = np.asarray(hypers, dtype=float)
    if hypers.shape != (2 * template.n_groups + 2,):
        raise ValidationError(
            f"hyper vector has shape {hypers.shape}, expected ({2 * template.n_groups + 2},)"
        )
    baseline = GGParams(
        inverse_transform_alpha(hypers[1]),
        template.baseline.zeta,
        float(np.exp(hypers[0])),
    )
    groups = []
    for j, group in enumerate(template.groups):
        prior = GGParams(
            inverse_transform_alpha(hypers[3 + 2 * j]),
            group.prior.zeta,
            float(np.exp(hypers[2 + 2 * j])),
        )
        groups.append(GroupSpec(slab=group.slab, M=group.M, prior=prior))
    return HibpSpec(baseline=baseline, groups=tuple(groups), gamma0=1.0)


def _require_poisson(spec: HibpSpec) -> None:
    for group in spec.groups:
        if not group.is_poisson:
            raise ValidationError("inference supports Poisson-slab groups only")


@dataclass
class ChainState:
    """Mutable state of one MCMC chain.

    ``hypers`` lives on the transformed scale.  Proposal blocks are laid
    out as ``[baseline discount, (theta_1 only, group_1 joint), ...]``,
    so arrays indexed by block have length ``2 * n_groups + 1``;
    ``step_sizes`` holds one random-walk scale per block and ``gen`` is
    the chain's private generator (all randomness of the chain flows
    through it).  ``prop_mean``/``prop_scatter``/``prop_n`` accumulate
    per-block sample moments during burn-in so two-coordinate proposals
    can align with the posterior's local correlation (they freeze when
    adaptation stops).  ``cache`` holds the additive likelihood pieces;
    it is private to the stepping functions.
    """

    template: HibpSpec
    X: np.ndarray
    hypers: np.ndarray
    step_sizes: np.ndarray
    gen: np.random.Generator
    iteration: int = 0
    loglik: float = -np.inf
    accepts: np.ndarray = field(default_factory=lambda: np.zeros(0))
    proposals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    adapt_counts: np.ndarray = field(default_factory=lambda: np.zeros(0))
    prop_mean: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    prop_scatter: np.ndarray = field(default_factory=lambda: np.zeros((0, 2, 2)))
    prop_n: np.ndarray = field(default_factory=lambda: np.zeros(0))
    cache: dict | None = None

    @property
    def n_blocks(self) -> int:
        return 2 * self.template.n_groups + 2

    def spec(self) -> HibpSpec:
        return spec_from_hypers(self.template, self.hypers)

    def proposal_chol(self, b: int) -> np.ndarray:
        """Cholesky factor shaping block ``b``'s two-dim random walk."""
        if self.prop_n[b] < 50:
            return np.eye(2)
        cov = self.prop_scatter[b] / (self.prop_n[b] - 1.0)
        cov = cov + 1e-8 * np.eye(2)
        try:
            return np.linalg.cholesky(cov / np.sqrt(np.linalg.det(cov)))
        except np.linalg.LinAlgError:
            return np.eye(2)

    def _adapt_moments(self, b: int) -> None:
        block_val = self.hypers[_block_coords(b, self.template.n_groups)]
        self.prop_n[b] += 1
        delta = block_val - self.prop_mean[b]
        self.prop_mean[b] += delta / self.prop_n[b]
        self.prop_scatter[b] += np.outer(delta, block_val - self.prop_mean[b])


def _block_coords(b: int, n_groups: int) -> slice:
    """Hyper-vector coordinates of proposal block ``b``.

    Block 0 is the baseline discount alone (``theta0`` is drawn exactly,
    not proposed); block ``1 + 2j`` is group ``j``'s ``log theta``
    alone; block ``2 + 2j`` is group ``j``'s pair; the final block is the
    joint scale move over every group's ``log theta`` at once.
    """
    if b == 0:
        return slice(1, 2)
    if b == 2 * n_groups + 1:
        return slice(2, 2 + 2 * n_groups, 2)
    j, kind = divmod(b - 1, 2)
    start = 2 + 2 * j
    return slice(start, start + 1) if kind == 0 else slice(start, start + 2)


def init_chain_state(
    template: HibpSpec,
    data: AggregatedData,
    stream: RngStream,
    overdispersed: bool = True,
) -> ChainState:
    """Fresh chain state: all-ones latents and (optionally) spread-out hypers."""
    _require_poisson(template)
    if data.agg.shape[0] != template.n_groups:
        raise ValidationError(
            f"data covers {data.agg.shape[0]} groups, template has {template.n_groups}"
        )
    if data.agg.shape[1] == 0:
        raise ValidationError(
            "cannot run inference on a dataset with no observed features: "
            "the baseline mass is not identified"
        )
    gen = stream.generator()
    n_coords = 2 * template.n_groups + 2
    if overdispersed:
        hypers = _INIT_SPREAD * gen.standard_normal(n_coords)
    else:
        hypers = hypers_from_spec(template)
    X = (data.agg > 0).astype(np.int64)
    n_blocks = 2 * template.n_groups + 2
    state = ChainState(
        template=template,
        X=X,
        hypers=np.asarray(hypers, dtype=float),
        step_sizes=np.full(n_blocks, _INIT_STEP),
        gen=gen,
        accepts=np.zeros(n_blocks),
        proposals=np.zeros(n_blocks),
        adapt_counts=np.zeros(n_blocks),
        prop_mean=np.zeros((n_blocks, 2)),
        prop_scatter=np.zeros((n_blocks, 2, 2)),
        prop_n=np.zeros(n_blocks),
    )
    _refresh_cache(state, data)
    return state


# ---------------------------------------------------------------------------
# Incremental likelihood bookkeeping
# ---------------------------------------------------------------------------


def _static_parts(template: HibpSpec, agg: np.ndarray) -> dict:
    """Data-dependent, hyper-independent pieces, computed once per chain."""
    groups = []
    for j, group in enumerate(template.groups):
        m_row = agg[j]
        cells = np.flatnonzero(m_row > 0)
        m_int = m_row[cells].astype(np.int64)
        m = m_int.astype(float)
        rate = group.slab.beta * group.M
        groups.append(
            {
                "cells": cells,
                "m_int": m_int,
                "m": m,
                "rate": rate,
                "log_denom_base": rate + group.prior.zeta,
                "zeta_j": group.prior.zeta,
                "const": float(np.sum(m * np.log(rate) - gammaln(m + 1.0)))
                if cells.size
                else 0.0,
            }
        )
    return {"groups": groups, "zeta": template.baseline.zeta, "r": agg.shape[1]}


def _group_rest(static_j: dict, alpha_j: float, n_int: np.ndarray) -> float:
    """Group term minus its ``n_sum * log theta_j`` part (alpha-dependent).

    The Stirling band is widened to the next power of two so that small
    latent fluctuations between sweeps keep hitting the same cached table.
    """
    if static_j["cells"].size == 0:
        return 0.0
    m_int = static_j["m_int"]
    band = 8
    while band < int(n_int.max()):
        band *= 2
    table = stirling_table(alpha_j, int(m_int.max()), min(int(m_int.max()), band))
    log_s = table[m_int, n_int]
    if np.any(np.isneginf(log_s)):
        return -np.inf
    m = static_j["m"]
    n = n_int.astype(float)
    denom = np.log(static_j["log_denom_base"])
    return static_j["const"] + float(
        np.sum(-(m - alpha_j * n) * denom + log_s)
    )


def _baseline_gammaln(alpha: float, n_k: np.ndarray, r: int) -> float:
    return float(np.sum(gammaln(n_k - alpha))) - r * gammaln(1.0 - alpha)


def _combine(
    static: dict,
    log_theta0: float,
    alpha: float,
    kappa: float,
    g_term: float,
    n_total: float,
    group_sum: float,
) -> float:
    zeta = static["zeta"]
    r = static["r"]
    phi = np.exp(log_theta0) * laplace_exponent_raw(alpha, zeta, kappa)
    return float(
        r * log_theta0
        - phi
        - (n_total - r * alpha) * np.log(kappa + zeta)
        + g_term
        + group_sum
    )


def _refresh_cache(state: ChainState, data: AggregatedData) -> None:
    """Recompute every cached likelihood piece from the current state."""
    cache = state.cache if state.cache is not None else {}
    if "static" not in cache:
        cache["static"] = _static_parts(state.template, data.agg)
    static = cache["static"]
    J = state.template.n_groups
    alpha = inverse_transform_alpha(state.hypers[1])
    n_k = state.X.sum(axis=0).astype(float)
    psi = np.zeros(J)
    rest = np.zeros(J)
    n_sum = np.zeros(J)
    for j in range(J):
        sj = static["groups"][j]
        alpha_j = inverse_transform_alpha(state.hypers[3 + 2 * j])
        psi[j] = np.exp(state.hypers[2 + 2 * j]) * laplace_exponent_raw(
            alpha_j, sj["zeta_j"], sj["rate"]
        )
        n_int = state.X[j, sj["cells"]]
        rest[j] = _group_rest(sj, alpha_j, n_int)
        n_sum[j] = float(n_int.sum())
    cache.update(
        {
            "n_k": n_k,
            "n_total": float(n_k.sum()),
            "psi": psi,
            "rest": rest,
            "n_sum": n_sum,
            "g_term": _baseline_gammaln(alpha, n_k, static["r"]),
        }
    )
    state.cache = cache
    group_sum = float(np.sum(n_sum * state.hypers[2::2] + rest))
    state.loglik = _combine(
        static,
        state.hypers[0],
        alpha,
        float(psi.sum()),
        cache["g_term"],
        cache["n_total"],
        group_sum,
    )


def gibbs_sweep_X(state: ChainState, data: AggregatedData) -> ChainState:
    """Resample every latent occurrence count from its exact conditional.

    Groups update in index order; within a group all cells update at once
    (they are conditionally independent given the other groups' rows).
    Cells with zero counts are pinned at zero occurrences.
    """
    spec = state.spec()
    agg = data.agg
    X = state.X
    r = agg.shape[1]
    if r == 0:
        _refresh_cache(state, data)
        return state
    alpha = spec.baseline.alpha
    log_kz = np.log(spec.total_dish_rate() + spec.baseline.zeta)
    n_k = X.sum(axis=0)

    for j, group in enumerate(spec.groups):
        m_row = agg[j]
        cells = np.flatnonzero(m_row > 0)
        if cells.size == 0:
            X[j] = 0
            continue
        m_cells = m_row[cells]
        m_max = int(m_cells.max())
        alpha_j = group.prior.alpha
        table = stirling_table(alpha_j, m_max)
        log_rate = np.log(group.prior.theta) + alpha_j * np.log(
            group.slab.beta * group.M + group.prior.zeta
        )
        n_other = (n_k - X[j])[cells].astype(float)

        # Work on the flat list of valid (cell, n) pairs — n runs 1..m per
        # cell, so the pair count is the row's total count, far below the
        # full cells-by-m_max rectangle when counts are skewed.
        rows = np.repeat(np.arange(cells.size), m_cells)
        cols = np.arange(int(m_cells.sum())) - np.repeat(
            np.cumsum(m_cells) - m_cells, m_cells
        )
        nvals = (cols + 1).astype(float)
        flat = (
            nvals * (log_rate - log_kz)
            + gammaln(n_other[rows] + nvals - alpha)
            + table[m_cells[rows], cols + 1]
            + state.gen.gumbel(size=rows.size)
        )
        weights = np.full((cells.size, m_max), -np.inf)
        weights[rows, cols] = flat
        new_n = 1 + np.argmax(weights, axis=1)
        X[j, cells] = new_n
        X[j, m_row == 0] = 0
        n_k = X.sum(axis=0)

    _refresh_cache(state, data)
    return state


def _collapsed(
    static: dict,
    alpha: float,
    kappa: float,
    g_term: float,
    n_total: float,
    group_sum: float,
) -> float:
    """Log-likelihood with the baseline mass integrated out.

    Under the scale-invariant prior implied by a flat law on
    ``log theta0``, the ``theta0^r exp(-theta0 * Psi)`` factor integrates
    to ``Gamma(r) / Psi^r`` exactly.
    """
    zeta = static["zeta"]
    r = static["r"]
    psi0 = laplace_exponent_raw(alpha, zeta, kappa)
    return float(
        gammaln(r)
        - r * np.log(psi0)
        - (n_total - r * alpha) * np.log(kappa + zeta)
        + g_term
        + group_sum
    )


def _log_prior(hypers: np.ndarray) -> float:
    """Gaussian log-prior over the transformed hypers, up to a constant.

    ``log theta0`` (index 0) is excluded: its prior is flat, which keeps
    the exact Gamma collapse available and is harmless because its
    conditional is proper whenever at least one feature was observed.
    """
    return float(-0.5 * np.sum(hypers[1:] ** 2) / PRIOR_SCALE**2)


def mh_step_hypers(
    state: ChainState,
    data: AggregatedData,
    adapt: bool = False,
    include_alpha: bool = True,
) -> ChainState:
    """One partially collapsed Metropolis-Hastings pass over the hypers.

    Every MH block targets the posterior with ``theta0`` integrated out:
    the baseline discount ``t(alpha)`` always updates, then each group
    gets a ``log theta_j``-only proposal, plus a joint
    ``(log theta_j, t(alpha_j))`` proposal when ``include_alpha`` is
    set, and a final scale proposal shifts every ``log theta_j`` by one
    common delta.  Proposals are symmetric Gaussians on the transformed
    scale, so
    the acceptance ratio is the difference of collapsed log-likelihood
    plus Gaussian log-prior (see :func:`_log_prior`).
    The pass ends with an exact ``Gamma(r, Psi)`` redraw of ``theta0``,
    which keeps the composite kernel invariant for the full joint
    posterior.  With ``adapt=True`` the per-block step sizes take a
    Robbins-Monro update toward the target acceptance rate; call it
    during burn-in only to preserve stationarity afterward.
    """
    if state.cache is None:
        _refresh_cache(state, data)
    cache = state.cache
    static = cache["static"]
    r = static["r"]
    zeta = static["zeta"]
    n_total = cache["n_total"]
    J = state.template.n_groups

    def group_sum_current() -> float:
        return float(np.sum(cache["n_sum"] * state.hypers[2::2] + cache["rest"]))

    coll = _collapsed(
        static,
        inverse_transform_alpha(state.hypers[1]),
        float(cache["psi"].sum()),
        cache["g_term"],
        n_total,
        group_sum_current(),
    ) + _log_prior(state.hypers)

    def consider(
        b: int,
        cand_coll: float,
        proposal: np.ndarray,
        on_accept,
        pair: bool = False,
    ) -> None:
        nonlocal coll
        if not np.isfinite(cand_coll):
            accept_prob = 0.0
        else:
            log_ratio = cand_coll - coll
            accept_prob = min(1.0, float(np.exp(min(log_ratio, 0.0))))
        state.proposals[b] += 1
        if state.gen.random() < accept_prob:
            state.hypers = proposal
            coll = cand_coll
            state.accepts[b] += 1
            on_accept()
        if adapt:
            state.adapt_counts[b] += 1
            scale = (accept_prob - _ADAPT_TARGET) / (1.0 + state.adapt_counts[b]) ** 0.6
            # The clip stops runaway growth when a posterior direction is
            # nearly flat (every proposal accepts, so the raw update would
            # compound without bound).
            state.step_sizes[b] = float(
                np.clip(state.step_sizes[b] * np.exp(scale), 1e-3, 10.0)
            )
            if pair:
                state._adapt_moments(b)

    # --- baseline discount block: t(alpha) alone --------------------------
    proposal = state.hypers.copy()
    proposal[1] += state.step_sizes[0] * state.gen.standard_normal()
    alpha_cand = inverse_transform_alpha(proposal[1])
    if alpha_cand >= ALPHA_MAX or (alpha_cand <= 0.0 and zeta == 0.0):
        cand = -np.inf
        g_cand = np.nan
    else:
        g_cand = _baseline_gammaln(alpha_cand, cache["n_k"], r)
        cand = _collapsed(
            static,
            alpha_cand,
            float(cache["psi"].sum()),
            g_cand,
            n_total,
            group_sum_current(),
        ) + _log_prior(proposal)

    def accept_baseline(g=g_cand):
        cache["g_term"] = g

    consider(0, cand, proposal, accept_baseline)

    # --- per-group blocks -------------------------------------------------
    for j in range(J):
        sj = static["groups"][j]
        alpha0 = inverse_transform_alpha(state.hypers[1])

        # theta_j-only move: dish rate rescales, Stirling terms unchanged.
        b = 1 + 2 * j
        proposal = state.hypers.copy()
        proposal[2 + 2 * j] += state.step_sizes[b] * state.gen.standard_normal()
        psi_cand = float(
            cache["psi"][j] * np.exp(proposal[2 + 2 * j] - state.hypers[2 + 2 * j])
        )
        kappa_cand = float(cache["psi"].sum() - cache["psi"][j] + psi_cand)
        gsum_cand = group_sum_current() + cache["n_sum"][j] * (
            proposal[2 + 2 * j] - state.hypers[2 + 2 * j]
        )
        cand = _collapsed(
            static, alpha0, kappa_cand, cache["g_term"], n_total, gsum_cand
        ) + _log_prior(proposal)

        def accept_theta(jj=j, psi_new=psi_cand):
            cache["psi"][jj] = psi_new

        consider(b, cand, proposal, accept_theta)

        if not include_alpha:
            continue

        # joint (theta_j, alpha_j) move: rebuild this group's Stirling part.
        b = 2 + 2 * j
        proposal = state.hypers.copy()
        proposal[2 + 2 * j : 4 + 2 * j] += state.step_sizes[b] * (
            state.proposal_chol(b) @ state.gen.standard_normal(2)
        )
        alpha_j_cand = inverse_transform_alpha(proposal[3 + 2 * j])
        if alpha_j_cand >= ALPHA_MAX or (alpha_j_cand <= 0.0 and sj["zeta_j"] == 0.0):
            consider(b, -np.inf, proposal, lambda: None, pair=True)
            continue
        rest_cand = _group_rest(sj, alpha_j_cand, state.X[j, sj["cells"]])
        psi_cand = float(
            np.exp(proposal[2 + 2 * j])
            * laplace_exponent_raw(alpha_j_cand, sj["zeta_j"], sj["rate"])
        )
        kappa_cand = float(cache["psi"].sum() - cache["psi"][j] + psi_cand)
        gsum_cand = (
            group_sum_current()
            - (cache["n_sum"][j] * state.hypers[2 + 2 * j] + cache["rest"][j])
            + (cache["n_sum"][j] * proposal[2 + 2 * j] + rest_cand)
        )
        cand = _collapsed(
            static, alpha0, kappa_cand, cache["g_term"], n_total, gsum_cand
        ) + _log_prior(proposal)

        def accept_joint(jj=j, psi_new=psi_cand, rest_new=rest_cand):
            cache["psi"][jj] = psi_new
            cache["rest"][jj] = rest_new

        consider(b, cand, proposal, accept_joint, pair=True)

    # --- joint scale move over every group mass ----------------------------
    # The slowest posterior direction scales all theta_j up together while
    # theta0 drops to compensate; coordinate-wise moves cross it only by a
    # slow random walk.  A common shift of every log theta_j travels along
    # it directly, and costs just one collapsed evaluation: the dish rates
    # all rescale by exp(delta) and the Stirling terms are untouched.
    b = 2 * J + 1
    delta = float(state.step_sizes[b] * state.gen.standard_normal())
    proposal = state.hypers.copy()
    proposal[2 : 2 + 2 * J : 2] += delta
    cand = _collapsed(
        static,
        inverse_transform_alpha(state.hypers[1]),
        float(cache["psi"].sum() * np.exp(delta)),
        cache["g_term"],
        n_total,
        group_sum_current() + n_total * delta,
    ) + _log_prior(proposal)

    def accept_scale(factor=float(np.exp(delta))):
        cache["psi"] *= factor

    consider(b, cand, proposal, accept_scale)

    # --- exact theta0 redraw ----------------------------------------------
    alpha0 = inverse_transform_alpha(state.hypers[1])
    kappa = float(cache["psi"].sum())
    psi0 = laplace_exponent_raw(alpha0, zeta, kappa)
    state.hypers = state.hypers.copy()
    state.hypers[0] = np.log(state.gen.gamma(r, 1.0 / psi0))
    state.loglik = _combine(
        static,
        state.hypers[0],
        alpha0,
        kappa,
        cache["g_term"],
        n_total,
        group_sum_current(),
    )
    return state


@dataclass
class ChainSummary:
    """Merged output of one or more chains.

    ``samples[name]`` is an ``(n_chains, n_kept)`` array on the natural
    scale; ``loglik`` matches it; ``iterations`` gives the source
    iteration of each kept column.  ``metadata`` records artifact-level
    sampler settings (transform, prior convention, steps, seeds).
    """

    param_names: list[str]
    samples: dict[str, np.ndarray]
    loglik: np.ndarray
    iterations: np.ndarray
    acceptance: np.ndarray
    final_step_sizes: np.ndarray
    metadata: dict

    @property
    def n_chains(self) -> int:
        return self.loglik.shape[0]

    def gelman_rubin_all(self) -> dict[str, float]:
        return {name: gelman_rubin(self.samples[name]) for name in self.param_names}

    def to_rows(self) -> list[list]:
        """Rows of (iteration, chain, *natural hypers, loglik)."""
        rows = []
        for c in range(self.n_chains):
            for i, it in enumerate(self.iterations.tolist()):
                row = [int(it), c]
                row += [float(self.samples[name][c, i]) for name in self.param_names]
                row.append(float(self.loglik[c, i]))
                rows.append(row)
        return rows


def _natural_hypers(hypers: np.ndarray, n_groups: int) -> list[float]:
    out = [float(np.exp(hypers[0])), inverse_transform_alpha(hypers[1])]
    for j in range(n_groups):
        out += [
            float(np.exp(hypers[2 + 2 * j])),
            inverse_transform_alpha(hypers[3 + 2 * j]),
        ]
    return out


def _run_single_chain(args) -> dict:
    template, data, chain_stream, n_iters, burnin, thin, alpha_every = args
    state = init_chain_state(template, data, chain_stream)
    names = hyper_names(template.n_groups)
    kept_iters: list[int] = []
    kept: list[list[float]] = []
    kept_ll: list[float] = []

    def record(it: int) -> None:
        kept_iters.append(it)
        kept.append(_natural_hypers(state.hypers, template.n_groups))
        kept_ll.append(state.loglik)

    if n_iters == 0:
        record(0)
    for it in range(1, n_iters + 1):
        gibbs_sweep_X(state, data)
        mh_step_hypers(
            state, data, adapt=it <= burnin, include_alpha=it % alpha_every == 0
        )
        state.iteration = it
        if it > burnin and (it - burnin) % thin == 0:
            record(it)
    sample_matrix = np.asarray(kept) if kept else np.zeros((0, len(names)))
    with np.errstate(invalid="ignore"):
        acceptance = np.where(
            state.proposals > 0, state.accepts / state.proposals, np.nan
        )
    return {
        "iterations": np.asarray(kept_iters, dtype=np.int64),
        "samples": sample_matrix,
        "loglik": np.asarray(kept_ll),
        "acceptance": acceptance,
        "step_sizes": state.step_sizes.copy(),
    }


def run_chains(
    template: HibpSpec,
    data: AggregatedData,
    n_chains: int,
    n_iters: int,
    burnin: int,
    rng: RngStream,
    thin: int = 1,
    alpha_every: int = 5,
    n_workers: int | None = None,
) -> ChainSummary:
    """Run independent chains and merge their retained samples.

    Chain ``c`` draws all its randomness from ``rng.child(c)``, so the
    output is identical whether chains run sequentially or in a process
    pool (``n_workers`` > 1, defaulting to the ``HIBP_LAB_THREADS``
    environment variable; chains are merged in index order).
    ``alpha_every`` sets the cadence of the joint ``(theta_j, alpha_j)``
    proposals (the slab discount indices mix more slowly but each joint
    proposal is far more expensive than the rest of an iteration).
    """
    if n_chains < 1:
        raise ValidationError("n_chains must be >= 1")
    if burnin >= n_iters and n_iters > 0:
        raise ValidationError("burnin must be smaller than n_iters")
    if thin < 1:
        raise ValidationError("thin must be >= 1")
    if alpha_every < 1:
        raise ValidationError("alpha_every must be >= 1")
    names = hyper_names(template.n_groups)
    jobs = [
        (template, data, rng.child(c), n_iters, burnin, thin, alpha_every)
        for c in range(n_chains)
    ]
    if n_workers is None:
        env = os.environ.get("HIBP_LAB_THREADS", "")
        n_workers = int(env) if env.strip() else 1
    if n_workers > 1 and n_chains > 1:
        with ProcessPoolExecutor(max_workers=min(n_workers, n_chains)) as pool:
            results = list(pool.map(_run_single_chain, jobs))
    else:
        results = [_run_single_chain(job) for job in jobs]

    iterations = results[0]["iterations"]
    samples = {
        name: np.stack([res["samples"][:, i] for res in results])
        for i, name in enumerate(names)
    }
    return ChainSummary(
        param_names=names,
        samples=samples,
        loglik=np.stack([res["loglik"] for res in results]),
        iterations=iterations,
        acceptance=np.stack([res["acceptance"] for res in results]),
        final_step_sizes=np.stack([res["step_sizes"] for res in results]),
        metadata={
            "seed": rng.seed,
            "stream": list(rng.stream),
            "n_chains": n_chains,
            "n_iters": n_iters,
            "burnin": burnin,
            "thin": thin,
            "alpha_every": alpha_every,
            "alpha_transform": f"scaled logit onto ({ALPHA_MIN}, 1)",
            "theta_transform": "log",
            "prior": (
                "flat on log theta0; independent "
                f"N(0, {PRIOR_SCALE}^2) on every other transformed coordinate"
            ),
            "proposal": (
                "partially collapsed pass: symmetric Gaussian random walk "
                "on the theta0-integrated posterior (baseline discount "
                "every iteration, per-group theta-only every iteration, "
                "joint (theta_j, alpha_j) every alpha_every iterations, "
                "common scale shift of all log theta_j every iteration) "
                "followed by an exact Gamma(r, Psi) redraw of theta0; "
                "burn-in adapts a det-normalized pair covariance and "
                "scalar steps, all frozen afterward"
            ),
            "adapt_target": _ADAPT_TARGET,
            "initial_step": _INIT_STEP,
            "init_spread": _INIT_SPREAD,
            "fixed": "zeta, zeta_j, beta_j from template",
        },
    )


def gibbs_latents(
    spec: HibpSpec,
    data: AggregatedData,
    rng: RngStream,
    sweeps: int = 50,
) -> np.ndarray:
    """Latent occurrence matrix after ``sweeps`` Gibbs passes at fixed hypers.

    Used to re-augment hyperparameter samples (e.g. from a chain file)
    with latents for prediction; deterministic given the stream.
    """
    state = init_chain_state(spec, data, rng, overdispersed=False)
    for _ in range(sweeps):
        gibbs_sweep_X(state, data)
    return state.X.copy()


def gelman_rubin(chains) -> float:
    """Split potential-scale-reduction factor of one scalar parameter.

    ``chains`` is an ``(n_chains, n_samples)`` array (or a sequence of
    equal-length 1-d arrays).  Each chain splits in half, the within- and
    between-half variances combine into the usual pooled estimate, and
    the result is ``sqrt(pooled / within)``.
    """
    arr = np.asarray(chains, dtype=float)
    if arr.ndim != 2:
        raise ParameterError("chains must form a 2-d array")
    n_chains, n_samples = arr.shape
    if n_chains < 2:
        raise ParameterError("the diagnostic needs at least two chains")
    if n_samples < 4:
        raise ParameterError("the diagnostic needs at least four samples per chain")
    half = n_samples // 2
    splits = np.concatenate([arr[:, :half], arr[:, half : 2 * half]], axis=0)
    w = float(np.mean(np.var(splits, axis=1, ddof=1)))
    if w == 0.0:
        raise DiagnosticError("within-chain variance is zero (constant chains)")
    b = half * float(np.var(np.mean(splits, axis=1), ddof=1))
    pooled = (half - 1) / half * w + b / half
    return float(np.sqrt(pooled / w))
