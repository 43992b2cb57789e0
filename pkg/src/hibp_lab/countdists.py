"""Count distributions used by the hierarchical feature-allocation models.

The building blocks are:

* multivariate mixed zero-truncated Poisson (MtP) vectors: a latent rate is
  drawn from a tilted GG mixing density, a zero-truncated Poisson total is
  drawn at that rate, and the total is split multinomially,
* the tilted mixing-rate density itself, sampled by an exact inverse-CDF
  construction (gamma variable times a monotone transform of a uniform),
* zero-truncated Poisson and zero-truncated negative-binomial laws,
* sums of independent zero-truncated negative binomials, collapsed through
  generalized Stirling numbers,
* the zero-truncated Binomial mixture induced by a stable-Beta process,
  together with the generalized Zipf law used to sample it.

All probability mass functions are computed in log space.  Samplers accept
either a :class:`RngStream` or a ``numpy.random.Generator`` and consume
randomness in a documented, deterministic order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from .ggmath import (
    ALPHA_MAX,
    GGParams,
    ParameterError,
    laplace_exponent,
    laplace_exponent_raw,
    stirling_table,
)

__all__ = [
    "RngStream",
    "as_generator",
    "MtPParams",
    "mtp_log_pmf",
    "mtp_total_log_pmf",
    "mtp_sample",
    "sample_mixing_rate",
    "tpoisson_log_pmf",
    "tpoisson_sample",
    "trunc_nb_log_pmf",
    "sum_trunc_nb_log_pmf",
    "trbinom_sb_log_pmf",
    "trbinom_sb_sample",
    "gzp_log_pmf",
    "gzp_sample",
    "nb_log_pmf",
    "nb_sample",
]

#: Switch point between the sequential inverse-CDF truncated-Poisson
#: sampler and rejection from the untruncated law.
_TPOISSON_INVERSION_MAX = 30.0


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible source of randomness.

    ``seed`` selects the experiment; ``stream`` is a tuple of integers
    naming a node in a tree of child streams.  The same ``(seed, stream)``
    always yields the identical generator state, independently of any
    other stream, which is what makes parallel and sequential execution
    produce byte-identical results.
    """

    seed: int
    stream: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        if isinstance(self.stream, int):
            object.__setattr__(self, "stream", (self.stream,))
        else:
            object.__setattr__(self, "stream", tuple(int(s) for s in self.stream))

    def child(self, *indices: int) -> "RngStream":
        """Derive a named child stream."""
        return RngStream(self.seed, self.stream + tuple(int(i) for i in indices))

    def generator(self) -> np.random.Generator:
        """Instantiate the generator for this stream."""
        return np.random.default_rng(
            np.random.SeedSequence(entropy=self.seed, spawn_key=self.stream)
        )


def as_generator(rng: RngStream | np.random.Generator) -> np.random.Generator:
    """Accept either a stream or a live generator."""
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise ParameterError(f"expected RngStream or numpy Generator, got {type(rng)!r}")


@dataclass(frozen=True)
class MtPParams:
    """Parameters of a multivariate mixed zero-truncated Poisson vector.

    ``kappas`` are the nonnegative component rates (at least one positive);
    ``mixing`` is the GG law of the latent rate multiplier.  The mass
    parameter of ``mixing`` does not affect the law and is ignored.
    """

    kappas: tuple[float, ...]
    mixing: GGParams

    def __post_init__(self) -> None:
        kappas = tuple(float(k) for k in np.atleast_1d(np.asarray(self.kappas, float)))
        object.__setattr__(self, "kappas", kappas)
        if len(kappas) == 0:
            raise ParameterError("at least one component rate is required")
        if any(not np.isfinite(k) or k < 0.0 for k in kappas):
            raise ParameterError("component rates must be finite and >= 0")
        if sum(kappas) <= 0.0:
            raise ParameterError("total rate must be > 0")

    @property
    def total(self) -> float:
        return float(sum(self.kappas))


def mtp_total_log_pmf(kappa: float, mixing: GGParams, m) -> np.ndarray | float:
    """Log-PMF of the total of an MtP vector with overall rate ``kappa``.

    Support is the positive integers; entries outside it map to ``-inf``.
    """
    if kappa <= 0.0:
        raise ParameterError("total rate must be > 0")
    m = np.asarray(m)
    alpha, zeta = mixing.alpha, mixing.zeta
    norm = laplace_exponent(mixing, kappa)
    mf = m.astype(float)
    with np.errstate(invalid="ignore"):
        out = np.where(
            m >= 1,
            mf * np.log(kappa)
            + gammaln(np.maximum(mf, 1.0) - alpha)
            - gammaln(1.0 - alpha)
            - gammaln(mf + 1.0)
            - (mf - alpha) * np.log(kappa + zeta)
            - np.log(norm),
            -np.inf,
        )
    return out if out.ndim else float(out)


def mtp_log_pmf(params: MtPParams, m) -> float:
    """Log-PMF of an MtP count vector at the integer vector ``m``.

    The all-zero vector lies outside the support and is a domain error;
    a positive count on a zero-rate component gives ``-inf``.
    """
    m = np.asarray(m)
    if m.shape != (len(params.kappas),):
        raise ParameterError(
            f"count vector has shape {m.shape}, expected ({len(params.kappas)},)"
        )
    if not np.issubdtype(m.dtype, np.integer):
        raise ParameterError("counts must be integers")
    if np.any(m < 0):
        raise ParameterError("counts must be >= 0")
    total = int(m.sum())
    if total == 0:
        raise ParameterError("the all-zero vector is outside the MtP support")
    kappas = np.asarray(params.kappas)
    if np.any((kappas == 0.0) & (m > 0)):
        return -np.inf
    out = float(mtp_total_log_pmf(params.total, params.mixing, total))
    pos = m > 0
    out += float(
        np.sum(m[pos] * np.log(kappas[pos]))
        - total * np.log(params.total)
        + gammaln(total + 1.0)
        - np.sum(gammaln(m[pos] + 1.0))
    )
    return out


def sample_mixing_rate(
    kappa: float,
    mixing: GGParams,
    rng: RngStream | np.random.Generator,
    size: int | None = None,
):
    """Sample the latent rate of an MtP vector with overall rate ``kappa``.

    The density is proportional to ``(1 - exp(-kappa * s))`` times the GG
    jump intensity of ``mixing``.  The draw is exact: a gamma variable with
    shape ``1 - alpha`` is multiplied by an independent factor obtained by
    inverting the closed-form CDF of the remaining piece.  Consumes one
    gamma draw then one uniform draw per sample.
    """
    if kappa <= 0.0:
        raise ParameterError("total rate must be > 0")
    gen = as_generator(rng)
    alpha, zeta = mixing.alpha, mixing.zeta
    g = gen.gamma(1.0 - alpha, size=size)
    q = gen.uniform(size=size)
    if alpha != 0.0:
        u = ((1.0 - q) * (zeta + kappa) ** alpha + q * zeta**alpha) ** (-1.0 / alpha)
    else:
        u = (zeta + kappa) ** (q - 1.0) * zeta ** (-q)
    out = g * u
    return out if size is not None else float(out)


def _log1mexp(x):
    """``log(1 - exp(-x))`` for ``x > 0``, stable at both ends."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        small = np.log(-np.expm1(-np.minimum(x, np.log(2.0))))
        large = np.log1p(-np.exp(-np.maximum(x, np.log(2.0))))
    out = np.where(x < np.log(2.0), small, large)
    return out if out.ndim else float(out)


def tpoisson_log_pmf(m, lam) -> np.ndarray | float:
    """Log-PMF of a zero-truncated Poisson with rate ``lam > 0``."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0.0):
        raise ParameterError("truncated-Poisson rate must be > 0")
    m = np.asarray(m)
    mf = m.astype(float)
    out = np.where(
        m >= 1,
        mf * np.log(lam) - lam - gammaln(mf + 1.0) - _log1mexp(lam),
        -np.inf,
    )
    return out if out.ndim else float(out)


def tpoisson_sample(
    lam,
    rng: RngStream | np.random.Generator,
    size: int | None = None,
):
    """Sample a zero-truncated Poisson at rate ``lam`` (scalar or array).

    Rates up to 30 use sequential inverse-CDF summation (exact, expected
    O(rate) work); larger rates use rejection from the untruncated Poisson,
    whose zero-probability is below 1e-13 there.
    """
    gen = as_generator(rng)
    lam_arr = np.asarray(lam, dtype=float)
    scalar = lam_arr.ndim == 0 and size is None
    if size is not None:
        lam_arr = np.broadcast_to(lam_arr, (size,) if np.ndim(size) == 0 else size)
    lam_arr = np.atleast_1d(lam_arr).astype(float)
    if np.any(lam_arr <= 0.0):
        raise ParameterError("truncated-Poisson rate must be > 0")
    out = np.zeros(lam_arr.shape, dtype=np.int64)

    small = lam_arr <= _TPOISSON_INVERSION_MAX
    if np.any(small):
        lam_s = lam_arr[small]
        # Target cumulative mass inside the untruncated law, shifted past 0.
        u = gen.uniform(size=lam_s.shape) * (-np.expm1(-lam_s))
        log_pmf = np.log(lam_s) - lam_s
        cum = np.exp(log_pmf)
        m = np.ones(lam_s.shape, dtype=np.int64)
        active = u > cum
        while np.any(active):
            m[active] += 1
            log_pmf = log_pmf + np.log(lam_s) - np.log(m)
            np.copyto(cum, cum + np.exp(log_pmf), where=active)
            active = u > cum
        out[small] = m
    if np.any(~small):
        lam_b = lam_arr[~small]
        draws = gen.poisson(lam_b)
        redo = draws == 0
        while np.any(redo):
            draws[redo] = gen.poisson(lam_b[redo])
            redo = draws == 0
        out[~small] = draws
    if scalar:
        return int(out[0])
    return out


def mtp_sample(
    params: MtPParams,
    rng: RngStream | np.random.Generator,
    size: int | None = None,
):
    """Sample MtP count vectors.

    Draw order per sample: mixing rate, then zero-truncated Poisson total,
    then one multinomial split of the total across components.
    """
    gen = as_generator(rng)
    kappa = params.total
    n = 1 if size is None else int(size)
    rate = sample_mixing_rate(kappa, params.mixing, gen, size=n)
    totals = tpoisson_sample(kappa * np.asarray(rate), gen)
    pvals = np.asarray(params.kappas) / kappa
    vectors = gen.multinomial(totals, pvals)
    if size is None:
        return vectors[0]
    return vectors


def trunc_nb_log_pmf(m, alpha: float, p: float) -> np.ndarray | float:
    """Log-PMF of a zero-truncated negative binomial on the positive integers.

    ``alpha < 1`` is the (possibly nonpositive) shape offset and
    ``p in (0, 1)`` the odds parameter.  The normalizing constant is
    expressed through the GG Laplace exponent, which keeps one code path
    across positive, zero, and negative ``alpha``.
    """
    if alpha >= ALPHA_MAX:
        raise ParameterError(f"alpha={alpha!r} must be < {ALPHA_MAX}")
    if not (0.0 < p < 1.0):
        raise ParameterError(f"p={p!r} must lie in (0, 1)")
    m = np.asarray(m)
    if np.any(m <= 0) and m.ndim == 0:
        raise ParameterError("the zero-truncated law has support m >= 1")
    mf = m.astype(float)
    log_norm = -np.log(laplace_exponent_raw(alpha, 1.0 - p, p))
    out = np.where(
        m >= 1,
        gammaln(np.maximum(mf, 1.0) - alpha)
        - gammaln(1.0 - alpha)
        - gammaln(mf + 1.0)
        + mf * np.log(p)
        + log_norm,
        -np.inf,
    )
    return out if out.ndim else float(out)


def sum_trunc_nb_log_pmf(
    m: int,
    n: int,
    alpha: float,
    p: float,
    table: np.ndarray | None = None,
) -> float:
    """Log-PMF of the sum of ``n`` iid zero-truncated negative binomials.

    The sum over count compositions collapses into a generalized Stirling
    number, so the value is a single table lookup plus elementary terms.
    ``n == 0`` is the point mass at 0.  ``table`` may supply a precomputed
    ``stirling_table(alpha, ...)`` covering ``(m, n)``.
    """
    if alpha >= ALPHA_MAX:
        raise ParameterError(f"alpha={alpha!r} must be < {ALPHA_MAX}")
    if not (0.0 < p < 1.0):
        raise ParameterError(f"p={p!r} must lie in (0, 1)")
    if m < 0 or n < 0:
        raise ParameterError("counts must be >= 0")
    if n == 0:
        return 0.0 if m == 0 else -np.inf
    if m < n:
        return -np.inf
    if table is None:
        table = stirling_table(alpha, m, n)
    log_s = float(table[m, n])
    return (
        m * np.log(p)
        - n * np.log(laplace_exponent_raw(alpha, 1.0 - p, p))
        + gammaln(n + 1.0)
        + log_s
        - gammaln(m + 1.0)
    )


def _gzp_log_weights(support_max: int, beta: float, alpha: float) -> np.ndarray:
    i = np.arange(1, support_max + 1, dtype=float)
    return gammaln(beta + alpha + i - 1.0) - gammaln(beta + i)


def gzp_log_pmf(m, support_max: int, beta: float, alpha: float) -> np.ndarray | float:
    """Log-PMF of the generalized Zipf law on ``{1, ..., support_max}``.

    Weights are ``gamma(beta + alpha + m - 1) / gamma(beta + m)``; this is
    the law of the mixing index in the stable-Beta binomial sampler.
    """
    if support_max < 1:
        raise ParameterError("support_max must be >= 1")
    if not (0.0 <= alpha < 1.0):
        raise ParameterError(f"alpha={alpha!r} must lie in [0, 1)")
    if beta <= -alpha:
        raise ParameterError(f"beta={beta!r} must exceed {-alpha}")
    weights = _gzp_log_weights(support_max, beta, alpha)
    log_norm = logsumexp(weights)
    m = np.asarray(m)
    inside = (m >= 1) & (m <= support_max)
    idx = np.where(inside, m - 1, 0)
    out = np.where(inside, weights[idx] - log_norm, -np.inf)
    return out if out.ndim else float(out)


def gzp_sample(
    support_max: int,
    beta: float,
    alpha: float,
    rng: RngStream | np.random.Generator,
    size: int | None = None,
):
    """Exact inverse-CDF sampling of the generalized Zipf law."""
    gen = as_generator(rng)
    weights = np.exp(gzp_log_pmf(np.arange(1, support_max + 1), support_max, beta, alpha))
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    u = gen.uniform(size=size)
    out = np.searchsorted(cum, u, side="right") + 1
    return out if size is not None else int(out)


def trbinom_sb_log_pmf(m, n_trials: int, alpha_b: float, beta_b: float):
    """Log-PMF of the per-dish total across ``n_trials`` documents under a
    stable-Beta process, conditioned positive.

    Support is ``{1, ..., n_trials}``; a gamma-ratio numerator over the
    partial-sum normalizer of the process's new-dish weights.
    """
    if n_trials < 1:
        raise ParameterError("n_trials must be >= 1")
    if not (0.0 <= alpha_b < 1.0):
        raise ParameterError(f"alpha_b={alpha_b!r} must lie in [0, 1)")
    if beta_b <= -alpha_b:
        raise ParameterError(f"beta_b={beta_b!r} must exceed {-alpha_b}")
    log_norm = logsumexp(_gzp_log_weights(n_trials, beta_b, alpha_b))
    m = np.asarray(m)
    mf = m.astype(float)
    mc = np.clip(mf, 1.0, float(n_trials))
    out = np.where(
        (m >= 1) & (m <= n_trials),
        gammaln(n_trials + 1.0)
        - gammaln(mc + 1.0)
        - gammaln(n_trials - mc + 1.0)
        + gammaln(mc - alpha_b)
        + gammaln(n_trials - mc + beta_b + alpha_b)
        - gammaln(1.0 - alpha_b)
        - gammaln(n_trials + beta_b)
        - log_norm,
        -np.inf,
    )
    return out if out.ndim else float(out)


def _tbinom_sample(
    n_trials: int, prob: np.ndarray, gen: np.random.Generator
) -> np.ndarray:
    """Vectorized zero-truncated Binomial(n_trials, prob) via inverse CDF."""
    prob = np.atleast_1d(np.asarray(prob, dtype=float))
    prob = np.clip(prob, 1e-15, 1.0 - 1e-15)
    log_p = np.log(prob)
    log_1mp = np.log1p(-prob)
    # log of 1 - (1-p)^n, computed stably.
    log_trunc = _log1mexp(-n_trials * log_1mp)
    u = gen.uniform(size=prob.shape)
    log_pmf = np.log(float(n_trials)) + log_p + (n_trials - 1) * log_1mp - log_trunc
    cum = np.exp(log_pmf)
    m = np.ones(prob.shape, dtype=np.int64)
    active = (u > cum) & (m < n_trials)
    while np.any(active):
        m[active] += 1
        step = np.log((n_trials - m + 1).astype(float)) - np.log(m.astype(float))
        log_pmf = log_pmf + step + log_p - log_1mp
        np.copyto(cum, cum + np.exp(log_pmf), where=active)
        active = (u > cum) & (m < n_trials)
    return m


def trbinom_sb_sample(
    n_trials: int,
    alpha_b: float,
    beta_b: float,
    rng: RngStream | np.random.Generator,
    size: int | None = None,
):
    """Sample the conditioned-positive stable-Beta binomial total.

    Draw order per sample: a generalized Zipf index, a beta success
    probability at that index, then a zero-truncated binomial count.
    """
    if n_trials < 1:
        raise ParameterError("n_trials must be >= 1")
    gen = as_generator(rng)
    n = 1 if size is None else int(size)
    z = gzp_sample(n_trials, beta_b, alpha_b, gen, size=n)
    h = gen.beta(1.0 - alpha_b, beta_b + alpha_b + np.asarray(z, float) - 1.0)
    m = _tbinom_sample(n_trials, h, gen)
    if size is None:
        return int(m[0])
    return m


def nb_log_pmf(x, shape: float, q: float) -> np.ndarray | float:
    """Log-PMF of a negative binomial with mean ``shape * q / (1 - q)``.

    ``P(x) = gamma(x + shape) / (x! gamma(shape)) q^x (1-q)^shape``.
    ``shape == 0`` degenerates to a point mass at zero.
    """
    if shape < 0.0:
        raise ParameterError(f"shape={shape!r} must be >= 0")
    if not (0.0 < q < 1.0):
        raise ParameterError(f"q={q!r} must lie in (0, 1)")
    x = np.asarray(x)
    xf = x.astype(float)
    if shape == 0.0:
        out = np.where(x == 0, 0.0, -np.inf)
    else:
        out = np.where(
            x >= 0,
            gammaln(xf + shape)
            - gammaln(shape)
            - gammaln(xf + 1.0)
            + xf * np.log(q)
            + shape * np.log1p(-q),
            -np.inf,
        )
    return out if out.ndim else float(out)


def nb_sample(
    shape,
    q: float,
    rng: RngStream | np.random.Generator,
    size: int | None = None,
):
    """Sample the negative binomial of :func:`nb_log_pmf` (vectorized shape)."""
    if not (0.0 < q < 1.0):
        raise ParameterError(f"q={q!r} must lie in (0, 1)")
    gen = as_generator(rng)
    shape_arr = np.asarray(shape, dtype=float)
    if np.any(shape_arr < 0.0):
        raise ParameterError("shape must be >= 0")
    scalar = shape_arr.ndim == 0 and size is None
    if size is not None:
        shape_arr = np.broadcast_to(shape_arr, (size,))
    shape_arr = np.atleast_1d(shape_arr)
    out = np.zeros(shape_arr.shape, dtype=np.int64)
    pos = shape_arr > 0.0
    if np.any(pos):
        out[pos] = gen.negative_binomial(shape_arr[pos], 1.0 - q)
    if scalar:
        return int(out[0])
    return out
