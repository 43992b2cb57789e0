"""On-disk formats for the workbench: data JSON, chain CSV, plot CSV.

Counts are stored as JSON integers and floats as full-precision decimal
strings produced by ``repr``, so every artifact round-trips exactly and
re-running a command with the same inputs yields byte-identical files.

Error conventions: :class:`DataFormatError` marks files that cannot be
parsed at all (broken JSON, ragged or headerless CSV) and surfaces as an
I/O failure; :class:`~hibp_lab.hibp.ValidationError` marks parseable
files whose content violates the schema (unknown keys, shape or
consistency mismatches).
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .hibp import AggregatedData, HibpDraw, ValidationError
from .hhibp import HhibpDraw
from .inference import ChainSummary

__all__ = [
    "MODEL_NAMES",
    "HIERARCHICAL_MODELS",
    "POISSON_MODELS",
    "DataFormatError",
    "LoadedData",
    "save_hibp_data",
    "save_hhibp_data",
    "load_data",
    "write_chain_csv",
    "read_chain_csv",
    "write_long_csv",
    "write_json",
]

POISSON_MODELS = ("gg-gg-poisson", "gg-gg-gg-poisson")
HIERARCHICAL_MODELS = ("gg-gg-gg-poisson", "gg-gg-sbp-bernoulli")
MODEL_NAMES = (
    "gg-gg-poisson",
    "gg-sbp-bernoulli",
    "gg-gg-gg-poisson",
    "gg-gg-sbp-bernoulli",
)


class DataFormatError(Exception):
    """A file could not be parsed in its expected format."""


@dataclass(frozen=True)
class LoadedData:
    """Parsed contents of a data JSON file.

    For two-level models ``X``/``agg`` are ``(J, r)`` and ``aggregated``
    is ready for the likelihood and inference entry points; ``draw`` is
    present only when the file carried per-occurrence document detail.
    For three-level models ``X`` holds the category occurrence matrix and
    ``draw`` is the hierarchical draw (occurrence detail required).
    """

    model: str
    J: int
    M: tuple
    r: int
    X: np.ndarray
    draw: HibpDraw | HhibpDraw | None
    aggregated: AggregatedData | None

    @property
    def hierarchical(self) -> bool:
        return self.model in HIERARCHICAL_MODELS


def _check_keys(obj: dict, required: set[str], optional: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise ValidationError(f"{where} must be a JSON object")
    for key in obj:
        if key not in required and key not in optional:
            raise ValidationError(f"unknown key {key!r} in {where}")
    for key in required:
        if key not in obj:
            raise ValidationError(f"missing key {key!r} in {where}")


def _int_matrix(value, shape: tuple[int, int], where: str) -> np.ndarray:
    arr = np.asarray(value)
    if arr.shape != shape or not np.issubdtype(arr.dtype, np.integer):
        raise ValidationError(
            f"{where} must be an integer matrix of shape {shape}, got {arr.shape} ({arr.dtype})"
        )
    if (arr < 0).any():
        raise ValidationError(f"{where} contains negative entries")
    return arr.astype(np.int64)


def _parse_cell_key(key: str, parts: int, where: str) -> tuple[int, ...]:
    try:
        idx = tuple(int(p) for p in key.split(","))
    except ValueError:
        idx = ()
    if len(idx) != parts:
        raise ValidationError(
            f"{where} keys must be {parts} comma-separated indices, got {key!r}"
        )
    return idx


def save_hibp_data(path, draw: HibpDraw, model: str, M) -> None:
    """Write a two-level draw to the JSON data format.

    Aggregated counts are always stored; per-occurrence document detail
    is stored when the draw carries it (simulation keeps it so the full
    ordered-list likelihood round-trips exactly).
    """
    if model not in MODEL_NAMES or model in HIERARCHICAL_MODELS:
        raise ValidationError(f"model {model!r} is not a two-level model name")
    M = [int(m) for m in M]
    J = len(M)
    payload: dict = {
        "model": model,
        "J": J,
        "M": M,
        "features": int(draw.r),
        "X": draw.X.astype(int).tolist(),
        "agg_counts": draw.agg.astype(int).tolist(),
    }
    if draw.occurrences is not None:
        detail = {}
        for j in range(J):
            for k in range(draw.r):
                vecs = draw.occurrences[j][k]
                if vecs:
                    detail[f"{j},{k}"] = [
                        [int(v) for v in vec] for vec in vecs
                    ]
        payload["doc_counts"] = detail
    write_json(path, payload)


def save_hhibp_data(path, draw: HhibpDraw, model: str, M) -> None:
    """Write a three-level draw; ``M[j][d]`` gives subgroup document counts."""
    if model not in HIERARCHICAL_MODELS:
        raise ValidationError(f"model {model!r} is not a three-level model name")
    M = [[int(m) for m in row] for row in M]
    J = len(M)
    payload: dict = {
        "model": model,
        "J": J,
        "D": [len(row) for row in M],
        "M": M,
        "features": int(draw.r),
        "Xhat": draw.Xhat.astype(int).tolist(),
        "C": {
            f"{j},{k}": draw.C[j][k].astype(int).tolist()
            for j in range(J)
            for k in range(draw.r)
            if draw.Xhat[j, k] > 0
        },
        "agg_counts": {str(j): draw.agg[j].astype(int).tolist() for j in range(J)},
    }
    if draw.occurrences is not None:
        detail = {}
        for j in range(J):
            for d in range(len(M[j])):
                for k in range(draw.r):
                    vecs = draw.occurrences[j][d][k]
                    if vecs:
                        detail[f"{j},{d},{k}"] = [
                            [int(v) for v in vec] for vec in vecs
                        ]
        payload["doc_counts"] = detail
    write_json(path, payload)


def load_data(path) -> LoadedData:
    """Load and strictly validate a data JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(payload, dict) or "model" not in payload:
        raise ValidationError(f"{path}: data file must be an object with a 'model' key")
    model = payload["model"]
    if model not in MODEL_NAMES:
        raise ValidationError(f"{path}: unknown model {model!r}")
    if model in HIERARCHICAL_MODELS:
        return _load_hhibp(payload, str(path))
    return _load_hibp(payload, str(path))


def _load_hibp(payload: dict, where: str) -> LoadedData:
    _check_keys(
        payload,
        required={"model", "J", "M", "features", "X", "agg_counts"},
        optional={"doc_counts"},
        where=where,
    )
    J = int(payload["J"])
    M = tuple(int(m) for m in payload["M"])
    if len(M) != J or J < 1 or any(m < 1 for m in M):
        raise ValidationError(f"{where}: 'M' must list {J} positive document counts")
    r = int(payload["features"])
    X = _int_matrix(payload["X"], (J, r), f"{where}: 'X'")
    agg = _int_matrix(payload["agg_counts"], (J, r), f"{where}: 'agg_counts'")
    if ((X == 0) & (agg > 0)).any() or ((X > 0) & (agg == 0)).any() or (X > agg).any():
        raise ValidationError(
            f"{where}: occurrence counts 'X' inconsistent with 'agg_counts'"
        )
    if r and (agg.sum(axis=0) == 0).any():
        raise ValidationError(f"{where}: every feature needs a positive total count")

    draw = None
    if "doc_counts" in payload:
        detail = payload["doc_counts"]
        if not isinstance(detail, dict):
            raise ValidationError(f"{where}: 'doc_counts' must be an object")
        occurrences: list[list[list[np.ndarray]]] = [
            [[] for _ in range(r)] for _ in range(J)
        ]
        for key, vecs in detail.items():
            j, k = _parse_cell_key(key, 2, f"{where}: 'doc_counts'")
            if not (0 <= j < J and 0 <= k < r):
                raise ValidationError(f"{where}: 'doc_counts' key {key!r} out of range")
            occurrences[j][k] = [
                _int_matrix([vec], (1, M[j]), f"{where}: 'doc_counts[{key}]'")[0]
                for vec in vecs
            ]
        doc_matrices = []
        for j in range(J):
            mat = np.zeros((M[j], r), dtype=np.int64)
            for k in range(r):
                if len(occurrences[j][k]) != X[j, k]:
                    raise ValidationError(
                        f"{where}: 'doc_counts[{j},{k}]' lists "
                        f"{len(occurrences[j][k])} occurrences, 'X' says {X[j, k]}"
                    )
                for vec in occurrences[j][k]:
                    if vec.sum() == 0:
                        raise ValidationError(
                            f"{where}: 'doc_counts[{j},{k}]' has an all-zero occurrence"
                        )
                    mat[:, k] += vec
            if not np.array_equal(mat.sum(axis=0), agg[j]):
                raise ValidationError(
                    f"{where}: per-document counts for group {j} do not sum to 'agg_counts'"
                )
            doc_matrices.append(mat)
        draw = HibpDraw(
            r=r, X=X, doc_counts=doc_matrices, agg=agg, occurrences=occurrences
        )
    aggregated = AggregatedData(
        M=M, agg=agg, doc_counts=draw.doc_counts if draw is not None else None
    )
    return LoadedData(
        model=payload["model"], J=J, M=M, r=r, X=X, draw=draw, aggregated=aggregated
    )


def _load_hhibp(payload: dict, where: str) -> LoadedData:
    _check_keys(
        payload,
        required={"model", "J", "D", "M", "features", "Xhat", "C", "agg_counts"},
        optional={"doc_counts"},
        where=where,
    )
    J = int(payload["J"])
    D = [int(d) for d in payload["D"]]
    if len(D) != J or J < 1 or any(d < 1 for d in D):
        raise ValidationError(f"{where}: 'D' must list {J} positive subgroup counts")
    M = payload["M"]
    if len(M) != J or any(len(M[j]) != D[j] for j in range(J)):
        raise ValidationError(f"{where}: 'M' must be per-category subgroup document counts")
    M = tuple(tuple(int(m) for m in row) for row in M)
    if any(m < 1 for row in M for m in row):
        raise ValidationError(f"{where}: document counts must be positive")
    r = int(payload["features"])
    Xhat = _int_matrix(payload["Xhat"], (J, r), f"{where}: 'Xhat'")

    C_in = payload["C"]
    if not isinstance(C_in, dict):
        raise ValidationError(f"{where}: 'C' must be an object")
    C: list[list[np.ndarray]] = [
        [np.zeros((0, D[j]), dtype=np.int64) for _ in range(r)] for j in range(J)
    ]
    for key, rows in C_in.items():
        j, k = _parse_cell_key(key, 2, f"{where}: 'C'")
        if not (0 <= j < J and 0 <= k < r):
            raise ValidationError(f"{where}: 'C' key {key!r} out of range")
        C[j][k] = _int_matrix(rows, (int(Xhat[j, k]), D[j]), f"{where}: 'C[{key}]'")
        if (C[j][k].sum(axis=1) == 0).any():
            raise ValidationError(f"{where}: 'C[{key}]' has an all-zero occurrence row")
    for j in range(J):
        for k in range(r):
            if Xhat[j, k] != C[j][k].shape[0]:
                raise ValidationError(
                    f"{where}: 'C[{j},{k}]' has {C[j][k].shape[0]} rows, 'Xhat' says {Xhat[j, k]}"
                )

    agg_in = payload["agg_counts"]
    if not isinstance(agg_in, dict) or set(agg_in) != {str(j) for j in range(J)}:
        raise ValidationError(f"{where}: 'agg_counts' must map category index to matrix")
    agg = [
        _int_matrix(agg_in[str(j)], (D[j], r), f"{where}: 'agg_counts[{j}]'")
        for j in range(J)
    ]

    draw = None
    if "doc_counts" in payload:
        detail = payload["doc_counts"]
        if not isinstance(detail, dict):
            raise ValidationError(f"{where}: 'doc_counts' must be an object")
        occurrences = [
            [[[] for _ in range(r)] for _ in range(D[j])] for j in range(J)
        ]
        for key, vecs in detail.items():
            j, d, k = _parse_cell_key(key, 3, f"{where}: 'doc_counts'")
            if not (0 <= j < J and 0 <= d < D[j] and 0 <= k < r):
                raise ValidationError(f"{where}: 'doc_counts' key {key!r} out of range")
            occurrences[j][d][k] = [
                _int_matrix([vec], (1, M[j][d]), f"{where}: 'doc_counts[{key}]'")[0]
                for vec in vecs
            ]
        doc_matrices = []
        for j in range(J):
            per_sub = []
            n_hat = np.zeros((D[j], r), dtype=np.int64)
            for k in range(r):
                if C[j][k].size:
                    n_hat[:, k] = C[j][k].sum(axis=0)
            for d in range(D[j]):
                mat = np.zeros((M[j][d], r), dtype=np.int64)
                for k in range(r):
                    if len(occurrences[j][d][k]) != n_hat[d, k]:
                        raise ValidationError(
                            f"{where}: 'doc_counts[{j},{d},{k}]' lists "
                            f"{len(occurrences[j][d][k])} occurrences, 'C' implies {n_hat[d, k]}"
                        )
                    for vec in occurrences[j][d][k]:
                        if vec.sum() == 0:
                            raise ValidationError(
                                f"{where}: 'doc_counts[{j},{d},{k}]' has an all-zero occurrence"
                            )
                        mat[:, k] += vec
                if not np.array_equal(mat.sum(axis=0), agg[j][d]):
                    raise ValidationError(
                        f"{where}: per-document counts for subgroup ({j},{d}) "
                        "do not sum to 'agg_counts'"
                    )
                per_sub.append(mat)
            doc_matrices.append(per_sub)
        draw = HhibpDraw(
            r=r, Xhat=Xhat, C=C, doc_counts=doc_matrices, agg=agg, occurrences=occurrences
        )
    return LoadedData(
        model=payload["model"], J=J, M=M, r=r, X=Xhat, draw=draw, aggregated=None
    )


def write_json(path, payload: dict) -> None:
    """Serialize a JSON artifact deterministically (stable key order)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def write_chain_csv(path, summary: ChainSummary) -> None:
    """One row per retained iteration per chain; floats via ``repr``."""
    header = ["iteration", "chain", *summary.param_names, "loglik"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in summary.to_rows():
            writer.writerow(
                [row[0], row[1], *[repr(float(v)) for v in row[2:]]]
            )


def read_chain_csv(path) -> dict:
    """Parse a chain CSV back into per-parameter ``(n_chains, n_kept)`` arrays."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty chain file") from None
        rows = list(reader)
    if (
        len(header) < 4
        or header[:2] != ["iteration", "chain"]
        or header[-1] != "loglik"
    ):
        raise DataFormatError(
            f"{path}: expected header 'iteration,chain,<hypers...>,loglik'"
        )
    names = header[2:-1]
    by_chain: dict[int, list[list[float]]] = {}
    iters: dict[int, list[int]] = {}
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise DataFormatError(f"{path}: row {lineno} has {len(row)} fields")
        try:
            it = int(row[0])
            chain = int(row[1])
            vals = [float(v) for v in row[2:]]
        except ValueError as exc:
            raise DataFormatError(f"{path}: row {lineno}: {exc}") from exc
        by_chain.setdefault(chain, []).append(vals)
        iters.setdefault(chain, []).append(it)
    if not by_chain:
        raise DataFormatError(f"{path}: chain file has no sample rows")
    chain_ids = sorted(by_chain)
    lengths = {len(by_chain[c]) for c in chain_ids}
    if len(lengths) != 1:
        raise ValidationError(f"{path}: chains have unequal lengths {sorted(lengths)}")
    its = [tuple(iters[c]) for c in chain_ids]
    if len(set(its)) != 1:
        raise ValidationError(f"{path}: chains disagree on retained iterations")
    stacked = np.asarray([by_chain[c] for c in chain_ids])
    return {
        "param_names": names,
        "chains": chain_ids,
        "iterations": np.asarray(its[0], dtype=np.int64),
        "samples": {name: stacked[:, :, i] for i, name in enumerate(names)},
        "loglik": stacked[:, :, -1],
    }


def write_long_csv(path, rows, header=("x", "y", "series", "replicate")) -> None:
    """Long-format plotting CSV: one observation per row."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow(
                [repr(float(v)) if isinstance(v, float) else v for v in row]
            )
