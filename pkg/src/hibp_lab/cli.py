"""Command-line workbench for simulation, inference, and prediction.

Commands: ``simulate | infer | diagnose | predict | classify | overlap |
plot-data``.  Every command prints one machine-readable JSON summary to
standard output and writes its artifacts to files; all outputs are pure
functions of (inputs, seed), so re-runs are byte-identical.

Exit codes: 0 success, 2 validation failure (bad config, schema or
domain violations), 3 I/O failure (missing or unparseable files), 4
numeric failure (undefined diagnostics, non-finite results).

The only environment variable honored is ``HIBP_LAB_THREADS`` (worker
count for multi-chain runs); the ``--threads`` flag overrides it.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .countdists import RngStream
from .dataio import (
    HIERARCHICAL_MODELS,
    MODEL_NAMES,
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
from .ggmath import BernoulliSBP, GGParams, ParameterError, PoissonSlab
from .hhibp import HhibpSpec, sample_hhibp
from .hibp import GroupSpec, HibpSpec, ValidationError, sample_hibp
from .inference import DiagnosticError, gelman_rubin, gibbs_latents, run_chains
from .predict import TestDoc, classify, marginal_log_predictive, overlap

__all__ = ["ConfigError", "NumericError", "ExperimentConfig", "load_config", "main"]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

# Fixed stream ids so each command consumes an independent slice of the seed.
_STREAM_SIMULATE = 1
_STREAM_INFER = 2
_STREAM_POSTERIOR = 3


class ConfigError(ValueError):
    """A configuration file violates the experiment schema."""


class NumericError(ArithmeticError):
    """A computation produced a non-finite or undefined result."""


@dataclass(frozen=True)
class McmcConfig:
    iters: int = 2000
    burnin: int = 1000
    chains: int = 3
    thin: int = 1
    alpha_every: int = 5
    samples: int = 24
    sweeps: int = 50


@dataclass(frozen=True)
class ClassifyConfig:
    n_test_per_group: int = 50


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description: model, parameters, and blocks."""

    model: str
    seed: int
    spec: HibpSpec | HhibpSpec
    mcmc: McmcConfig = field(default_factory=McmcConfig)
    classify: ClassifyConfig = field(default_factory=ClassifyConfig)

    @property
    def hierarchical(self) -> bool:
        return self.model in HIERARCHICAL_MODELS


def _require_keys(obj, required: set[str], optional: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a JSON object")
    for key in obj:
        if key not in required and key not in optional:
            raise ConfigError(f"unknown key {key!r} in {where}")
    for key in required:
        if key not in obj:
            raise ConfigError(f"missing key {key!r} in {where}")


def _number(obj: dict, key: str, where: str) -> float:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number")
    return float(value)


def _integer(obj: dict, key: str, where: str, minimum: int = 0) -> int:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}.{key} must be an integer")
    if value < minimum:
        raise ConfigError(f"{where}.{key} must be >= {minimum}")
    return value


def _gg_params(obj: dict, where: str) -> GGParams:
    _require_keys(obj, {"alpha", "zeta", "theta"}, set(), where)
    try:
        return GGParams(
            _number(obj, "alpha", where),
            _number(obj, "zeta", where),
            _number(obj, "theta", where),
        )
    except ParameterError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _group_spec(obj: dict, where: str, poisson: bool, M: int | None = None) -> GroupSpec:
    if poisson:
        required = {"theta", "alpha", "zeta", "beta"}
    else:
        required = {"slab_theta", "slab_alpha", "slab_beta"}
    if M is None:
        required = required | {"M"}
        _require_keys(obj, required, set(), where)
        M = _integer(obj, "M", where, minimum=1)
    else:
        _require_keys(obj, required, set(), where)
    try:
        if poisson:
            return GroupSpec(
                slab=PoissonSlab(beta=_number(obj, "beta", where)),
                M=M,
                prior=GGParams(
                    _number(obj, "alpha", where),
                    _number(obj, "zeta", where),
                    _number(obj, "theta", where),
                ),
            )
        return GroupSpec(
            slab=BernoulliSBP(
                alpha=_number(obj, "slab_alpha", where),
                beta=_number(obj, "slab_beta", where),
                theta=_number(obj, "slab_theta", where),
            ),
            M=M,
            prior=None,
        )
    except ParameterError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _mcmc_config(obj: dict, where: str) -> McmcConfig:
    _require_keys(
        obj,
        set(),
        {"iters", "burnin", "chains", "thin", "alpha_every", "samples", "sweeps"},
        where,
    )
    defaults = McmcConfig()
    values = {}
    for name, minimum in [
        ("iters", 1),
        ("burnin", 0),
        ("chains", 1),
        ("thin", 1),
        ("alpha_every", 1),
        ("samples", 1),
        ("sweeps", 1),
    ]:
        if name in obj:
            values[name] = _integer(obj, name, where, minimum=minimum)
    cfg = McmcConfig(**{**defaults.__dict__, **values})
    if cfg.burnin >= cfg.iters:
        raise ConfigError(f"{where}.burnin must be smaller than {where}.iters")
    return cfg


def load_config(path) -> ExperimentConfig:
    """Parse and strictly validate an experiment configuration file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: not valid JSON ({exc})") from exc
    where = "config"
    _require_keys(
        payload,
        {"model", "seed", "baseline"},
        {"gamma0", "groups", "categories", "mcmc", "classify"},
        where,
    )
    model = payload["model"]
    if model not in MODEL_NAMES:
        raise ConfigError(
            f"config.model must be one of {', '.join(MODEL_NAMES)}; got {model!r}"
        )
    seed = _integer(payload, "seed", where, minimum=0)
    baseline = _gg_params(payload["baseline"], "config.baseline")
    gamma0 = _number(payload, "gamma0", where) if "gamma0" in payload else 1.0
    hierarchical = model in HIERARCHICAL_MODELS
    poisson = model in ("gg-gg-poisson", "gg-gg-gg-poisson")

    try:
        if hierarchical:
            if "categories" not in payload or "groups" in payload:
                raise ConfigError(
                    "three-level models need 'categories' (and no 'groups')"
                )
            cats = payload["categories"]
            if not isinstance(cats, list) or not cats:
                raise ConfigError("config.categories must be a non-empty list")
            cat_params = []
            subgroups = []
            for j, cat in enumerate(cats):
                cwhere = f"config.categories[{j}]"
                _require_keys(
                    cat, {"alpha", "zeta", "theta", "subgroups"}, set(), cwhere
                )
                cat_params.append(
                    _gg_params(
                        {k: cat[k] for k in ("alpha", "zeta", "theta")}, cwhere
                    )
                )
                subs = cat["subgroups"]
                if not isinstance(subs, list) or not subs:
                    raise ConfigError(f"{cwhere}.subgroups must be a non-empty list")
                subgroups.append(
                    tuple(
                        _group_spec(sub, f"{cwhere}.subgroups[{d}]", poisson)
                        for d, sub in enumerate(subs)
                    )
                )
            spec: HibpSpec | HhibpSpec = HhibpSpec(
                baseline=baseline,
                categories=tuple(cat_params),
                subgroups=tuple(subgroups),
                gamma0=gamma0,
            )
        else:
            if "groups" not in payload or "categories" in payload:
                raise ConfigError("two-level models need 'groups' (and no 'categories')")
            groups = payload["groups"]
            if not isinstance(groups, list) or not groups:
                raise ConfigError("config.groups must be a non-empty list")
            spec = HibpSpec(
                baseline=baseline,
                groups=tuple(
                    _group_spec(grp, f"config.groups[{j}]", poisson)
                    for j, grp in enumerate(groups)
                ),
                gamma0=gamma0,
            )
    except ParameterError as exc:
        raise ConfigError(f"config: {exc}") from exc

    mcmc = (
        _mcmc_config(payload["mcmc"], "config.mcmc")
        if "mcmc" in payload
        else McmcConfig()
    )
    cls_cfg = ClassifyConfig()
    if "classify" in payload:
        _require_keys(payload["classify"], set(), {"n_test_per_group"}, "config.classify")
        if "n_test_per_group" in payload["classify"]:
            cls_cfg = ClassifyConfig(
                n_test_per_group=_integer(
                    payload["classify"], "n_test_per_group", "config.classify", minimum=1
                )
            )
    return ExperimentConfig(
        model=model, seed=seed, spec=spec, mcmc=mcmc, classify=cls_cfg
    )


# ---------------------------------------------------------------------------
# Shared command helpers
# ---------------------------------------------------------------------------


def _emit(summary: dict) -> None:
    print(json.dumps(summary))


def _resolve_seed(args, config: ExperimentConfig | None) -> int:
    if args.seed is not None:
        return args.seed
    if config is not None:
        return config.seed
    raise ConfigError("a seed is required (pass --seed or provide a config)")


def _require_out(args) -> str:
    if not args.out:
        raise ConfigError("this command requires --out PATH")
    return args.out


def _load_config_arg(args) -> ExperimentConfig:
    if not args.config:
        raise ConfigError("this command requires --config PATH")
    return load_config(args.config)


def _check_template_matches(config: ExperimentConfig, data: LoadedData) -> None:
    if config.hierarchical or data.hierarchical:
        raise ValidationError("inference supports two-level Poisson-slab models only")
    if config.model != data.model:
        raise ValidationError(
            f"config model {config.model!r} does not match data model {data.model!r}"
        )
    spec = config.spec
    if spec.n_groups != data.J:
        raise ValidationError(
            f"config has {spec.n_groups} groups, data file has {data.J}"
        )
    for j, group in enumerate(spec.groups):
        if group.M != data.M[j]:
            raise ValidationError(
                f"config group {j} has M={group.M}, data file has M={data.M[j]}"
            )


def _spec_from_natural(template: HibpSpec, values: dict[str, float]) -> HibpSpec:
    """Rebuild a spec from one chain row's natural-scale hyperparameters."""
    baseline = GGParams(values["alpha"], template.baseline.zeta, values["theta0"])
    groups = []
    for j, group in enumerate(template.groups):
        groups.append(
            GroupSpec(
                slab=group.slab,
                M=group.M,
                prior=GGParams(
                    values[f"alpha_{j + 1}"],
                    group.prior.zeta,
                    values[f"theta_{j + 1}"],
                ),
            )
        )
    return HibpSpec(baseline=baseline, groups=tuple(groups), gamma0=1.0)


def _posterior_samples(
    config: ExperimentConfig,
    data: LoadedData,
    chains: dict,
    seed: int,
) -> list[tuple[HibpSpec, np.ndarray]]:
    """Thin the chain file and re-augment each kept row with latents.

    The chain file stores hyperparameters only; the latent occurrence
    matrix is regenerated per sample by a short seeded Gibbs run, which
    is deterministic given (seed, chain, row).
    """
    _check_template_matches(config, data)
    names = chains["param_names"]
    expected = 2 + 2 * config.spec.n_groups
    if len(names) != expected:
        raise ValidationError(
            f"chain file has {len(names)} hyper columns, config implies {expected}"
        )
    n_chains, n_kept = chains["loglik"].shape
    want = max(1, config.mcmc.samples // n_chains)
    idx = np.unique(np.linspace(0, n_kept - 1, num=min(want, n_kept), dtype=int))
    samples = []
    for c in range(n_chains):
        for i in idx.tolist():
            values = {name: float(chains["samples"][name][c, i]) for name in names}
            try:
                spec_s = _spec_from_natural(config.spec, values)
            except ParameterError as exc:
                raise ValidationError(f"chain row (chain {c}, index {i}): {exc}") from exc
            X_s = gibbs_latents(
                spec_s,
                data.aggregated,
                RngStream(seed, (_STREAM_POSTERIOR, c, i)),
                sweeps=config.mcmc.sweeps,
            )
            samples.append((spec_s, X_s))
    return samples


def _load_test_doc(obj: dict, r: int, where: str) -> TestDoc:
    _require_keys(obj, {"counts"}, {"new_counts", "group"}, where)
    counts = obj["counts"]
    if not isinstance(counts, list) or len(counts) != r:
        raise ValidationError(f"{where}: 'counts' must list {r} integers")
    if not all(isinstance(c, int) and not isinstance(c, bool) and c >= 0 for c in counts):
        raise ValidationError(f"{where}: 'counts' must be non-negative integers")
    new_counts = obj.get("new_counts", [])
    if not isinstance(new_counts, list) or not all(
        isinstance(c, int) and not isinstance(c, bool) and c >= 1 for c in new_counts
    ):
        raise ValidationError(f"{where}: 'new_counts' must be positive integers")
    try:
        return TestDoc(counts=np.asarray(counts, dtype=np.int64), new_counts=tuple(new_counts))
    except (ParameterError, ValidationError) as exc:
        raise ValidationError(f"{where}: {exc}") from exc


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    config = _load_config_arg(args)
    out = _require_out(args)
    seed = _resolve_seed(args, config)
    stream = RngStream(seed, (_STREAM_SIMULATE,))
    if config.hierarchical:
        draw = sample_hhibp(config.spec, stream, keep_occurrences=True)
        M = [[sub.M for sub in subs] for subs in config.spec.subgroups]
        save_hhibp_data(out, draw, config.model, M)
        total = int(sum(int(a.sum()) for a in draw.agg))
    else:
        draw = sample_hibp(config.spec, stream, keep_occurrences=True)
        M = [group.M for group in config.spec.groups]
        save_hibp_data(out, draw, config.model, M)
        total = int(draw.agg.sum())
    _emit(
        {
            "command": "simulate",
            "model": config.model,
            "seed": seed,
            "features": int(draw.r),
            "total_count": total,
            "out": str(out),
        }
    )
    return EXIT_OK


def cmd_infer(args) -> int:
    config = _load_config_arg(args)
    data = load_data(args.data)
    out = _require_out(args)
    seed = _resolve_seed(args, config)
    _check_template_matches(config, data)
    summary = run_chains(
        config.spec,
        data.aggregated,
        n_chains=config.mcmc.chains,
        n_iters=config.mcmc.iters,
        burnin=config.mcmc.burnin,
        rng=RngStream(seed, (_STREAM_INFER,)),
        thin=config.mcmc.thin,
        alpha_every=config.mcmc.alpha_every,
        n_workers=args.threads,
    )
    write_chain_csv(out, summary)
    rhat = None
    if summary.n_chains >= 2 and summary.loglik.shape[1] >= 4:
        rhat = {k: float(v) for k, v in summary.gelman_rubin_all().items()}
    _emit(
        {
            "command": "infer",
            "model": config.model,
            "seed": seed,
            "chains": summary.n_chains,
            "kept_per_chain": int(summary.loglik.shape[1]),
            "rhat": rhat,
            "acceptance": np.round(summary.acceptance, 4).tolist(),
            "out": str(out),
            "sampler": summary.metadata,
        }
    )
    return EXIT_OK


def cmd_diagnose(args) -> int:
    chains = read_chain_csv(args.chains)
    names = chains["param_names"]
    n_chains, n_kept = chains["loglik"].shape
    try:
        rhat = {name: gelman_rubin(chains["samples"][name]) for name in names}
    except DiagnosticError as exc:
        raise DiagnosticError(
            f"{args.chains}: {exc}; the chains did not move, so the "
            "potential-scale-reduction diagnostic is undefined"
        ) from exc
    _emit(
        {
            "command": "diagnose",
            "chains": n_chains,
            "kept_per_chain": n_kept,
            "rhat": rhat,
            "max_rhat": max(rhat.values()),
        }
    )
    return EXIT_OK


def cmd_predict(args) -> int:
    config = _load_config_arg(args)
    data = load_data(args.data)
    chains = read_chain_csv(args.chains)
    seed = _resolve_seed(args, config)
    with open(args.doc, "r", encoding="utf-8") as fh:
        try:
            doc_payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{args.doc}: not valid JSON ({exc})") from exc
    doc = _load_test_doc(doc_payload, data.r, str(args.doc))
    group = args.group
    if group is None:
        raise ConfigError("predict requires --group INDEX")
    if not (0 <= group < data.J):
        raise ValidationError(f"--group must be in [0, {data.J - 1}]")
    samples = _posterior_samples(config, data, chains, seed)
    scores = np.array(
        [
            marginal_log_predictive(spec_s, data.aggregated, doc, group, X=X_s)
            for spec_s, X_s in samples
        ]
    )
    log_pred = float(logsumexp(scores) - np.log(len(scores)))
    if not np.isfinite(log_pred):
        raise NumericError("the predictive probability underflowed to zero")
    _emit(
        {
            "command": "predict",
            "group": group,
            "log_predictive": log_pred,
            "n_samples": int(len(scores)),
            "seed": seed,
        }
    )
    return EXIT_OK


def cmd_classify(args) -> int:
    config = _load_config_arg(args)
    data = load_data(args.data)
    chains = read_chain_csv(args.chains)
    out = _require_out(args)
    seed = _resolve_seed(args, config)
    with open(args.testset, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{args.testset}: not valid JSON ({exc})") from exc
    _require_keys(payload, {"docs"}, set(), str(args.testset))
    if not isinstance(payload["docs"], list) or not payload["docs"]:
        raise ValidationError(f"{args.testset}: 'docs' must be a non-empty list")
    docs = []
    labels = []
    for i, obj in enumerate(payload["docs"]):
        where = f"{args.testset}: docs[{i}]"
        docs.append(_load_test_doc(obj, data.r, where))
        label = obj.get("group")
        if label is not None and not (
            isinstance(label, int) and 0 <= label < data.J
        ):
            raise ValidationError(f"{where}: 'group' must be an index in [0, {data.J - 1}]")
        labels.append(label)

    samples = _posterior_samples(config, data, chains, seed)
    rows = []
    hits = 0
    n_labeled = 0
    for i, doc in enumerate(docs):
        result = classify(samples, data.aggregated, doc)
        row = {
            "doc": i,
            "true_group": labels[i],
            "predicted": result.group,
            "log_scores": [float(v) for v in result.log_scores],
        }
        rows.append(row)
        if labels[i] is not None:
            n_labeled += 1
            hits += int(result.group == labels[i])
    write_json(out, {"results": rows})
    accuracy = hits / n_labeled if n_labeled else None
    _emit(
        {
            "command": "classify",
            "n_docs": len(docs),
            "n_labeled": n_labeled,
            "accuracy": accuracy,
            "n_samples": int(len(samples)),
            "seed": seed,
            "out": str(out),
        }
    )
    return EXIT_OK


def cmd_overlap(args) -> int:
    data = load_data(args.data)
    value = overlap(np.asarray(data.X))
    _emit(
        {
            "command": "overlap",
            "model": data.model,
            "groups": int(data.X.shape[0]),
            "features": data.r,
            "overlap": value,
        }
    )
    return EXIT_OK


def cmd_plotdata(args) -> int:
    out = _require_out(args)
    if args.kind == "counts":
        data = load_data(args.input)
        if data.hierarchical:
            matrix = np.vstack([a for a in data.draw.agg]) if data.draw else None
            if matrix is None:
                raise ValidationError("hierarchical plot data needs occurrence detail")
            series = [
                f"category-{j}/subgroup-{d}"
                for j in range(data.J)
                for d in range(len(data.M[j]))
            ]
        else:
            matrix = data.aggregated.agg
            series = [f"group-{j}" for j in range(data.J)]
        totals = matrix.sum(axis=0)
        order = np.argsort(-totals, kind="stable")[: args.top]
        rows = []
        for rank, k in enumerate(order.tolist(), start=1):
            for s, name in enumerate(series):
                rows.append((rank, int(matrix[s, k]), name, int(k)))
        write_long_csv(out, rows)
        _emit(
            {
                "command": "plot-data",
                "kind": "counts",
                "features_kept": int(order.size),
                "series": len(series),
                "out": str(out),
            }
        )
    else:
        chains = read_chain_csv(args.input)
        rows = []
        for name in chains["param_names"]:
            arr = chains["samples"][name]
            for c in range(arr.shape[0]):
                for i, it in enumerate(chains["iterations"].tolist()):
                    rows.append((it, float(arr[c, i]), name, c))
        write_long_csv(out, rows)
        _emit(
            {
                "command": "plot-data",
                "kind": "chains",
                "series": len(chains["param_names"]),
                "replicates": int(chains["loglik"].shape[0]),
                "out": str(out),
            }
        )
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing and dispatch
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hibp-lab",
        description=(
            "Workbench for hierarchical random count-matrix models: "
            "simulation, MCMC inference, prediction, and classification."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, out_required: bool = False) -> None:
        p.add_argument("--config", help="experiment configuration JSON")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument(
            "--out",
            required=out_required,
            help="output artifact path",
        )
        p.add_argument(
            "--threads",
            type=int,
            default=None,
            help="worker count (default: HIBP_LAB_THREADS or 1)",
        )

    p = sub.add_parser("simulate", help="draw a synthetic dataset")
    common(p, out_required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("infer", help="run MCMC chains on a dataset")
    p.add_argument("data", help="data JSON file")
    common(p, out_required=True)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("diagnose", help="convergence diagnostics for a chain file")
    p.add_argument("chains", help="chain CSV file")
    common(p)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("predict", help="posterior predictive score of one document")
    p.add_argument("data", help="training data JSON file")
    p.add_argument("chains", help="chain CSV file")
    p.add_argument("doc", help="test document JSON file")
    p.add_argument("--group", type=int, help="target group index")
    common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("classify", help="assign test documents to groups")
    p.add_argument("data", help="training data JSON file")
    p.add_argument("chains", help="chain CSV file")
    p.add_argument("testset", help="test set JSON file")
    common(p, out_required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("overlap", help="mean pairwise feature-sharing fraction")
    p.add_argument("data", help="data JSON file")
    common(p)
    p.set_defaults(func=cmd_overlap)

    p = sub.add_parser("plot-data", help="emit long-format CSV for plotting")
    p.add_argument("input", help="data JSON or chain CSV file")
    p.add_argument(
        "--kind",
        choices=["counts", "chains"],
        required=True,
        help="counts: top-feature count matrix; chains: parameter traces",
    )
    p.add_argument("--top", type=int, default=100, help="feature cap for counts")
    common(p, out_required=True)
    p.set_defaults(func=cmd_plotdata)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValidationError, ParameterError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DataFormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DiagnosticError, NumericError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
