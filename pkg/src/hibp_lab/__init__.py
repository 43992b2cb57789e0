"""Hierarchical generalized-gamma feature-count models.

A workbench for two- and three-level hierarchical random-measure count
models: exact marginal likelihoods, exchangeable count distributions,
posterior characterizations, predictive laws, MCMC hyperparameter
inference, and a reproducible command-line interface.

Layered design (each module depends only on the ones above it):

- :mod:`~hibp_lab.ggmath` — generalized-gamma Laplace exponents,
  generalized Stirling number tables, slab rate functions.
- :mod:`~hibp_lab.countdists` — exchangeable count distributions
  (mixed-truncated-Poisson, truncated negative binomial and its sums,
  stable-Beta truncated binomial) with samplers and a reproducible
  stream-splitting RNG.
- :mod:`~hibp_lab.hibp` — the two-level model: specification, forward
  sampler, exact full and aggregated marginal likelihoods.
- :mod:`~hibp_lab.hhibp` — the three-level model.
- :mod:`~hibp_lab.posterior` — conjugate posterior characterizations of
  the latent random measures.
- :mod:`~hibp_lab.predict` — predictive laws for held-out documents,
  classification, and the feature-overlap statistic.
- :mod:`~hibp_lab.inference` — Gibbs-within-Metropolis MCMC over latent
  occurrence counts and hyperparameters, with convergence diagnostics.
- :mod:`~hibp_lab.dataio` / :mod:`~hibp_lab.cli` — file formats and the
  ``hibp-lab`` command-line tool.
"""
from .countdists import (
    MtPParams,
    RngStream,
    as_generator,
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
from .dataio import (
    DataFormatError,
    LoadedData,
    load_data,
    read_chain_csv,
    save_hhibp_data,
    save_hibp_data,
    write_chain_csv,
    write_json,
    write_long_csv,
)
from .ggmath import (
    ALPHA_MAX,
    BernoulliSBP,
    GGParams,
    ParameterError,
    PoissonSlab,
    laplace_exponent,
    laplace_exponent_raw,
    log_stirling,
    new_dish_rate,
    new_dish_rate_increment,
    stirling_table,
)
from .hhibp import (
    HhibpDraw,
    HhibpPredictiveBreakdown,
    HhibpSpec,
    hhibp_predict_sample,
    log_marginal_hhibp,
    sample_hhibp,
)
from .hibp import (
    AggregatedData,
    GroupSpec,
    HibpDraw,
    HibpSpec,
    ValidationError,
    aggregated_from_draw,
    log_marginal_aggregated,
    log_marginal_full,
    sample_hibp,
)
from .inference import (
    ALPHA_MIN,
    ChainState,
    ChainSummary,
    DiagnosticError,
    gelman_rubin,
    gibbs_latents,
    gibbs_sweep_X,
    init_chain_state,
    mh_step_hypers,
    run_chains,
)
from .posterior import (
    BetaLaw,
    GammaLaw,
    PosteriorHhibp,
    PosteriorHibp,
    posterior_hhibp,
    posterior_hibp,
    sample_posterior_jumps,
)
from .predict import (
    ClassifyResult,
    TestDoc,
    classify,
    log_predictive_aggregated,
    log_predictive_full,
    marginal_log_predictive,
    mc_log_predictive,
    overlap,
    predict_sample,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "ParameterError",
    "ValidationError",
    "DataFormatError",
    "DiagnosticError",
    # randomness
    "RngStream",
    "as_generator",
    # generalized-gamma calculus
    "ALPHA_MAX",
    "ALPHA_MIN",
    "GGParams",
    "PoissonSlab",
    "BernoulliSBP",
    "laplace_exponent",
    "laplace_exponent_raw",
    "new_dish_rate",
    "new_dish_rate_increment",
    "stirling_table",
    "log_stirling",
    # count distributions
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
    # two-level model
    "GroupSpec",
    "HibpSpec",
    "HibpDraw",
    "AggregatedData",
    "sample_hibp",
    "log_marginal_full",
    "log_marginal_aggregated",
    "aggregated_from_draw",
    # three-level model
    "HhibpSpec",
    "HhibpDraw",
    "HhibpPredictiveBreakdown",
    "sample_hhibp",
    "log_marginal_hhibp",
    "hhibp_predict_sample",
    # posteriors
    "GammaLaw",
    "BetaLaw",
    "PosteriorHibp",
    "PosteriorHhibp",
    "posterior_hibp",
    "posterior_hhibp",
    "sample_posterior_jumps",
    # prediction
    "TestDoc",
    "ClassifyResult",
    "predict_sample",
    "log_predictive_full",
    "log_predictive_aggregated",
    "marginal_log_predictive",
    "mc_log_predictive",
    "classify",
    "overlap",
    # inference
    "ChainState",
    "ChainSummary",
    "init_chain_state",
    "gibbs_sweep_X",
    "mh_step_hypers",
    "run_chains",
    "gibbs_latents",
    "gelman_rubin",
    # data files
    "LoadedData",
    "save_hibp_data",
    "save_hhibp_data",
    "load_data",
    "write_chain_csv",
    "read_chain_csv",
    "write_long_csv",
    "write_json",
]
