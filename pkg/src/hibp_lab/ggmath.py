"""Closed-form functions for generalized-gamma (GG) random measures.

This module collects the small amount of special-function machinery the
rest of the package is built on:

* the Laplace exponent of a GG random measure, in all three parameter
  regimes (positive stability index, gamma limit, negative index),
* the rate at which new dishes (features) are selected by a group after
  serving some number of documents, for Poisson slabs over a GG measure
  and for Bernoulli slabs over a stable-Beta process,
* the one-document increment of that rate, in closed form,
* log-space tables of generalized Stirling numbers, which collapse sums
  over per-occurrence count compositions into a single coefficient.

Everything here is deterministic, log-space where sums of products are
involved, and validated against hand-derived values in the test suite.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

__all__ = [
    "ALPHA_MAX",
    "ParameterError",
    "GGParams",
    "PoissonSlab",
    "BernoulliSBP",
    "laplace_exponent",
    "laplace_exponent_raw",
    "new_dish_rate",
    "new_dish_rate_increment",
    "stirling_table",
    "log_stirling",
]

#: Stability indices closer to 1 than this are rejected: the relevant
#: gamma-function ratios degenerate as the index approaches 1 and no model
#: in this package is meaningful there.
ALPHA_MAX = 1.0 - 1e-6


class ParameterError(ValueError):
    """A parameter fell outside its admissible domain."""


@dataclass(frozen=True)
class GGParams:
    """Parameters of a generalized-gamma random measure.

    Attributes
    ----------
    alpha:
        Stability index.  ``0 < alpha < 1`` gives the generalized-gamma
        family proper, ``alpha == 0`` the gamma process, and ``alpha < 0``
        a compound-Poisson family built from gamma-distributed jumps.
    zeta:
        Exponential tilting parameter.  Must be ``>= 0`` when
        ``0 < alpha < 1`` and ``> 0`` when ``alpha <= 0``.
    theta:
        Positive total-mass multiplier.  The Laplace exponent reported by
        :func:`laplace_exponent` is per unit mass; multiply by ``theta``
        to obtain the full exponent of the measure.
    """

    alpha: float
    zeta: float
    theta: float = 1.0

    def __post_init__(self) -> None:
        if not np.isfinite(self.alpha) or self.alpha >= ALPHA_MAX:
            raise ParameterError(
                f"stability index alpha={self.alpha!r} must be finite and < {ALPHA_MAX}"
            )
        if not np.isfinite(self.zeta) or self.zeta < 0.0:
            raise ParameterError(f"tilt zeta={self.zeta!r} must be finite and >= 0")
        if self.alpha <= 0.0 and self.zeta == 0.0:
            raise ParameterError("zeta must be > 0 when alpha <= 0")
        if not np.isfinite(self.theta) or self.theta <= 0.0:
            raise ParameterError(f"mass theta={self.theta!r} must be finite and > 0")

    def tilted(self, extra: float) -> "GGParams":
        """Return the same measure exponentially tilted by ``extra`` more."""
        if extra < 0.0:
            raise ParameterError(f"tilt increment {extra!r} must be >= 0")
        return GGParams(self.alpha, self.zeta + extra, self.theta)


@dataclass(frozen=True)
class PoissonSlab:
    """Per-document Poisson counts with rate ``beta`` per unit jump size."""

    beta: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.beta) or self.beta <= 0.0:
            raise ParameterError(f"slab rate beta={self.beta!r} must be finite and > 0")


@dataclass(frozen=True)
class BernoulliSBP:
    """Per-document Bernoulli inclusions over a stable-Beta process.

    The stable-Beta process plays the role of the group-level prior, so its
    three parameters live here rather than in a separate prior object.
    Admissible ranges: ``0 <= alpha < 1``, ``beta > -alpha``, ``theta > 0``.
    """

    alpha: float
    beta: float
    theta: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.alpha < 1.0) or self.alpha >= ALPHA_MAX:
            raise ParameterError(
                f"stable-Beta index alpha={self.alpha!r} must lie in [0, 1)"
            )
        if not np.isfinite(self.beta) or self.beta <= -self.alpha:
            raise ParameterError(
                f"stable-Beta concentration beta={self.beta!r} must exceed {-self.alpha}"
            )
        if not np.isfinite(self.theta) or self.theta <= 0.0:
            raise ParameterError(f"mass theta={self.theta!r} must be finite and > 0")


SlabSpec = PoissonSlab | BernoulliSBP


def laplace_exponent_raw(alpha: float, zeta: float, t):
    """Per-unit-mass Laplace exponent of a GG measure, without validation.

    Stable in all three regimes:

    * ``0 < alpha < 1``:  ``((t + zeta)**alpha - zeta**alpha) / alpha``,
    * ``alpha == 0``:     ``log(1 + t / zeta)``,
    * ``alpha < 0``:      ``(zeta**alpha - (t + zeta)**alpha) / (-alpha)``,

    evaluated through ``log1p``/``expm1`` so that small ``t / zeta`` does
    not lose precision.  Accepts scalar or array ``t``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ParameterError("laplace exponent argument t must be >= 0")
    if alpha > 0.0:
        if zeta == 0.0:
            out = t**alpha / alpha
        else:
            out = (zeta**alpha) * np.expm1(alpha * np.log1p(t / zeta)) / alpha
    elif alpha == 0.0:
        out = np.log1p(t / zeta)
    else:
        delta = -alpha
        out = -(zeta**-delta) * np.expm1(-delta * np.log1p(t / zeta)) / delta
    return out if out.ndim else float(out)


def laplace_exponent(params: GGParams, t):
    """Per-unit-mass Laplace exponent of ``params`` evaluated at ``t >= 0``.

    Multiply by ``params.theta`` for the exponent of the full measure.
    Nonnegative, nondecreasing, and concave in ``t``; continuous in the
    stability index across the ``alpha == 0`` boundary.
    """
    return laplace_exponent_raw(params.alpha, params.zeta, t)


def _sbp_log_weights(slab: BernoulliSBP, n_docs: int) -> np.ndarray:
    """Log of the per-document new-dish weights of a stable-Beta process."""
    i = np.arange(1, n_docs + 1, dtype=float)
    return (
        gammaln(1.0 - slab.alpha)
        + gammaln(slab.beta + slab.alpha + i - 1.0)
        - gammaln(slab.beta + i)
    )


def new_dish_rate(prior: GGParams | None, slab: SlabSpec, n_docs: int) -> float:
    """Expected-rate parameter for distinct dishes after ``n_docs`` documents.

    For a Poisson slab over a GG prior this is
    ``theta * Psi(beta * n_docs)`` with ``Psi`` the prior's Laplace
    exponent.  For Bernoulli inclusions over a stable-Beta process it is
    the partial sum of the process's per-document new-dish weights.
    Returns 0 when ``n_docs == 0``.
    """
    if n_docs < 0:
        raise ParameterError(f"document count {n_docs!r} must be >= 0")
    if isinstance(slab, PoissonSlab):
        if prior is None:
            raise ParameterError("a Poisson slab requires a GG prior")
        return prior.theta * laplace_exponent(prior, slab.beta * n_docs)
    if prior is not None:
        raise ParameterError("a Bernoulli stable-Beta slab embeds its own prior")
    if n_docs == 0:
        return 0.0
    return slab.theta * float(np.exp(_sbp_log_weights(slab, n_docs)).sum())


def new_dish_rate_increment(prior: GGParams | None, slab: SlabSpec, n_docs: int) -> float:
    """Closed form for ``new_dish_rate(n_docs + 1) - new_dish_rate(n_docs)``.

    This is the rate at which one additional document selects dishes that
    the first ``n_docs`` documents never selected.
    """
    if n_docs < 0:
        raise ParameterError(f"document count {n_docs!r} must be >= 0")
    if isinstance(slab, PoissonSlab):
        if prior is None:
            raise ParameterError("a Poisson slab requires a GG prior")
        return prior.theta * laplace_exponent_raw(
            prior.alpha, prior.zeta + slab.beta * n_docs, slab.beta
        )
    if prior is not None:
        raise ParameterError("a Bernoulli stable-Beta slab embeds its own prior")
    return slab.theta * float(
        np.exp(
            gammaln(1.0 - slab.alpha)
            + gammaln(slab.beta + slab.alpha + n_docs)
            - gammaln(slab.beta + n_docs + 1.0)
        )
    )


def _stirling_rows(table: np.ndarray, alpha: float, m_max: int, n_max: int) -> None:
    """Fill the table by the row recurrence, touching only valid entries.

    Row ``m + 1`` combines row ``m`` with coefficients ``m - alpha * n``;
    those are positive on the triangle (``n <= m`` implies
    ``m - alpha * n >= n (1 - alpha) > 0``), so log space is safe.
    """
    n = np.arange(0, n_max + 1, dtype=float)
    for mm in range(1, m_max):
        hi = min(mm, n_max)
        coef = mm - alpha * n[1 : hi + 1]
        grown = np.log(coef) + table[mm, 1 : hi + 1]
        table[mm + 1, 1 : hi + 1] = np.logaddexp(grown, table[mm, 0:hi])
        table[mm + 1, 1] = gammaln(mm + 1 - alpha) - gammaln(1.0 - alpha)
        if mm + 1 <= n_max:
            table[mm + 1, mm + 1] = 0.0


def _stirling_columns(table: np.ndarray, alpha: float, m_max: int, n_max: int) -> None:
    """Fill the table column by column via a cumulative log-sum-exp.

    For fixed ``n`` the recurrence is linear in ``m`` with positive
    coefficients ``a_m = m - alpha * n``:  writing ``P`` for the running
    product of the ``a_m`` starting at the diagonal entry ``S(n, n) = 1``,
    ``S(m, n) / P_m = 1 + sum of S(i, n - 1) / P_{i+1}`` — a cumulative
    sum, so each column costs one vectorized pass.  Much faster than the
    row recurrence when ``n_max << m_max``.
    """
    for n in range(2, n_max + 1):
        if n > m_max:
            break
        ms = np.arange(n, m_max, dtype=float)
        log_p = np.concatenate([[0.0], np.cumsum(np.log(ms - alpha * n))])
        shifted = table[n:m_max, n - 1] - log_p[1:]
        acc = np.logaddexp.accumulate(np.concatenate([[0.0], shifted]))
        table[n : m_max + 1, n] = log_p + acc


@lru_cache(maxsize=24)
def _stirling_table_cached(alpha: float, m_max: int, n_max: int) -> np.ndarray:
    table = np.full((m_max + 1, n_max + 1), -np.inf)
    table[0, 0] = 0.0
    if m_max >= 1 and n_max >= 1:
        m = np.arange(1, m_max + 1, dtype=float)
        table[1:, 1] = gammaln(m - alpha) - gammaln(1.0 - alpha)
        if n_max >= 2:
            if 8 * n_max <= m_max:
                _stirling_columns(table, alpha, m_max, n_max)
            else:
                _stirling_rows(table, alpha, m_max, n_max)
    table.setflags(write=False)
    return table


def stirling_table(alpha: float, m_max: int, n_max: int | None = None) -> np.ndarray:
    """Log-space table of generalized Stirling numbers.

    Entry ``[m, n]`` holds ``log S(m, n)`` for the triangular array defined
    by ``S(m, 1) = gamma(m - alpha) / gamma(1 - alpha)``, ``S(m, m) = 1``
    and ``S(m + 1, n) = (m - alpha * n) S(m, n) + S(m, n - 1)``; entries
    outside the triangle are ``-inf`` and ``[0, 0]`` is 0.  All entries are
    positive for ``alpha < 1``, so a plain log-space recursion is exact.

    Tables are cached per ``(alpha, m_max, n_max)`` and returned read-only,
    so concurrent readers can share them safely.
    """
    if not np.isfinite(alpha) or alpha >= ALPHA_MAX:
        raise ParameterError(f"alpha={alpha!r} must be finite and < {ALPHA_MAX}")
    if m_max < 0:
        raise ParameterError(f"m_max={m_max!r} must be >= 0")
    if n_max is None:
        n_max = m_max
    if n_max < 0:
        raise ParameterError(f"n_max={n_max!r} must be >= 0")
    n_max = min(n_max, m_max) if m_max > 0 else n_max
    return _stirling_table_cached(float(alpha), int(m_max), int(n_max))


def log_stirling(alpha: float, m: int, n: int) -> float:
    """Scalar ``log S(m, n)`` convenience wrapper around the cached table."""
    if m < 0 or n < 0:
        raise ParameterError("stirling indices must be >= 0")
    if n > m:
        return -np.inf
    return float(stirling_table(alpha, m)[m, n])
