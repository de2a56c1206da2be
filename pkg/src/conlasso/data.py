"""Synthetic instances, CSV ingestion with log-contrast preprocessing, and
result files.

Output directory layout written by :func:`save_results`:

``summary.json``
    Task metadata and headline numbers.
``beta.csv``
    ``feature,name,value`` for a single solution.
``path.csv``
    ``lambda`` then one column per feature (plus ``sigma`` for R3).
``cv.csv``
    ``lambda,mean_error,std_error``.
``stabsel.csv``
    ``feature,name,frequency,selected``.

Floats are written with 17 significant digits so files round-trip exactly.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .rng import SplitMix64

FLOAT_FMT = ".17g"


def fmt(x) -> str:
    return format(float(x), FLOAT_FMT)


# --- synthetic data -------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of :func:`random_data`.

    ``k`` counts constraint rows: with ``zerosum`` the first row is all ones
    and ``k - 1`` standard-normal rows follow; without it all ``k`` rows are
    normal. ``magnitude`` scales the planted values (see
    :func:`planted_values`).
    """

    n: int = 100
    d: int = 100
    d_nonzero: int = 5
    k: int = 1
    sigma: float = 0.5
    zerosum: bool = True
    seed: int = 0
    magnitude: float = 4.0

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValueError("n and d must be positive")
        if not 0 <= self.d_nonzero <= self.d:
            raise ValueError("d_nonzero must lie in [0, d]")
        if not 0 <= self.k <= self.d:
            raise ValueError("k must lie in [0, d]")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.zerosum and self.d_nonzero == 1:
            raise ValueError("a zero-sum coefficient vector cannot have exactly one nonzero")


def planted_values(m: int, zerosum: bool, gen: SplitMix64) -> np.ndarray:
    """Nonzero values of the planted coefficient vector, in draw order.

    Zero-sum vectors alternate ``+a, -1`` with ``ceil(m / 2)`` positive
    entries of size ``a = floor(m / 2) / ceil(m / 2)`` (so ``a = 1`` for even
    ``m``). Otherwise signs are random with unit magnitude.
    """
    if m == 0:
        return np.zeros(0)
    if not zerosum:
        return np.where(gen.uniform(m) < 0.5, -1.0, 1.0)
    pos, neg = (m + 1) // 2, m // 2
    vals = np.empty(m)
    vals[0::2] = neg / pos
    vals[1::2] = -1.0
    return vals


def random_data(spec: SyntheticSpec):
    """Draw ``(X, C, y, beta_true)`` for ``spec``.

    Draw order from ``SplitMix64(spec.seed)``: ``X`` (row-major, ``n * d``
    normals), support positions, value signs (non-zero-sum only), extra
    constraint rows, then the noise vector. The planted vector lies in the
    null space of the all-ones row when ``zerosum``; extra normal rows are
    not enforced on it.
    """
    gen = SplitMix64(spec.seed)
    n, d = spec.n, spec.d
    X = gen.normal(n * d).reshape(n, d)
    support = np.sort(gen.sample(d, spec.d_nonzero))
    beta = np.zeros(d)
    beta[support] = spec.magnitude * planted_values(spec.d_nonzero, spec.zerosum, gen)
    rows = []
    if spec.k:
        if spec.zerosum:
            rows.append(np.ones(d))
        extra = spec.k - len(rows)
        if extra:
            rows.extend(gen.normal(extra * d).reshape(extra, d))
    C = np.array(rows).reshape(len(rows), d)
    y = X @ beta + spec.sigma * gen.normal(n)
    return X, C, y, beta


# --- CSV ingestion -----------------------------------------------------------------

@dataclass(frozen=True)
class DatasetOptions:
    """Preprocessing of the compositional block.

    ``compositional`` names the columns that form the composition; when it is
    empty no transformation is applied and no constraint is generated.
    """

    compositional: Sequence[str] = ()
    pseudocount: float = 0.5
    closure: bool = True
    log: bool = True
    zerosum: bool = True
    exclude: Sequence[str] = ()


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    C: np.ndarray
    feature_names: list
    response: str
    compositional_mask: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]


class DataFormatError(ValueError):
    """Malformed input file; the message carries file, row and column."""


def read_table(path: str):
    """Header and float rows of a CSV file (RFC 4180, '.' decimals)."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror}") from exc
    if not rows:
        raise DataFormatError(f"{path}: empty file, header row required")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise DataFormatError(f"{path}: duplicate column names in header")
    body = []
    for i, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataFormatError(f"{path}: row {i} has {len(row)} fields, expected {len(header)}")
        vals = []
        for name, cell in zip(header, row):
            try:
                v = float(cell)
            except ValueError:
                raise DataFormatError(
                    f"{path}: non-numeric value {cell!r} at row {i}, column {name!r}") from None
            if not math.isfinite(v):
                raise DataFormatError(f"{path}: non-finite value at row {i}, column {name!r}")
            vals.append(v)
        body.append(vals)
    return header, np.array(body, dtype=float).reshape(len(body), len(header))


def compositional_transform(counts, pseudocount=0.5, closure=True, log=True):
    """Pseudocount, row closure and log of a count/abundance block."""
    Z = np.asarray(counts, dtype=float) + pseudocount
    if closure:
        tot = Z.sum(axis=1, keepdims=True)
        bad = np.flatnonzero(tot[:, 0] <= 0)
        if bad.size:
            raise DataFormatError(
                f"compositional row {int(bad[0]) + 1} sums to zero; use a positive pseudocount")
        Z = Z / tot
    if log:
        if np.any(Z <= 0):
            r = int(np.argwhere(Z <= 0)[0, 0])
            raise DataFormatError(f"compositional row {r + 1} has a nonpositive part before log")
        Z = np.log(Z)
    return Z


def load_dataset(feature_file: str, response_column: str,
                 options: DatasetOptions = DatasetOptions(),
                 response_file: Optional[str] = None) -> Dataset:
    """Load features and response from CSV.

    The response comes from ``response_column`` of ``feature_file`` or, when
    ``response_file`` is given, of that file (same row order). Compositional
    columns are transformed by :func:`compositional_transform`; the zero-sum
    row has ones on those columns and zeros on the remaining covariates.
    """
    header, table = read_table(feature_file)
    if response_file is None:
        if response_column not in header:
            raise DataFormatError(f"{feature_file}: missing response column {response_column!r}")
        y = table[:, header.index(response_column)]
        drop = {response_column}
    else:
        rh, rt = read_table(response_file)
        if response_column not in rh:
            raise DataFormatError(f"{response_file}: missing response column {response_column!r}")
        y = rt[:, rh.index(response_column)]
        drop = set()
        if y.size != table.shape[0]:
            raise DataFormatError(
                f"{response_file}: {y.size} responses for {table.shape[0]} feature rows")
    drop |= set(options.exclude)
    for c in list(options.compositional) + list(options.exclude):
        if c not in header:
            raise DataFormatError(f"{feature_file}: missing column {c!r}")
    names = [h for h in header if h not in drop]
    X = table[:, [header.index(h) for h in names]].copy()
    comp = set(options.compositional)
    mask = np.array([h in comp for h in names], dtype=bool)
    if mask.any():
        X[:, mask] = compositional_transform(X[:, mask], options.pseudocount,
                                             options.closure, options.log)
    if mask.any() and options.zerosum:
        C = mask.astype(float)[None, :]
    else:
        C = np.zeros((0, len(names)))
    meta = dict(source=os.path.abspath(feature_file), response=response_column,
                pseudocount=options.pseudocount, closure=options.closure, log=options.log)
    return Dataset(X, np.asarray(y, dtype=float), C, names, response_column, mask, meta)


def write_matrix(path: str, M, header: Optional[Sequence[str]] = None):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header is None:
            header = [f"x{j}" for j in range(M.shape[1])]
        w.writerow(header)
        for row in M:
            w.writerow([fmt(v) for v in row])


def read_matrix(path: str, allow_empty: bool = True) -> np.ndarray:
    header, table = read_table(path)
    if table.size == 0 and not allow_empty:
        raise DataFormatError(f"{path}: no data rows")
    return table.reshape(table.shape[0], len(header))


# --- result files --------------------------------------------------------------------

SUMMARY_KEYS = ("task", "formulation", "method", "lambda", "lambda_max", "objective", "sigma",
                "selected", "runtime_seconds", "iterations", "kkt_residual", "seed")


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _names(d, names):
    return list(names) if names is not None else [f"x{j}" for j in range(d)]


def _open(out_dir, fname):
    path = os.path.join(out_dir, fname)
    try:
        return open(path, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def write_summary(out_dir: str, summary: dict):
    missing = [k for k in SUMMARY_KEYS if k not in summary]
    if missing:
        raise ValueError(f"summary lacks keys {missing}")
    with _open(out_dir, "summary.json") as fh:
        json.dump(summary, fh, indent=2, sort_keys=False)
        fh.write("\n")


def read_summary(out_dir: str) -> dict:
    with open(os.path.join(out_dir, "summary.json"), encoding="utf-8") as fh:
        return json.load(fh)


def write_beta(out_dir: str, beta, names=None):
    beta = np.asarray(beta, dtype=float)
    names = _names(beta.size, names)
    with _open(out_dir, "beta.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "name", "value"])
        for j, (nm, v) in enumerate(zip(names, beta)):
            w.writerow([j, nm, fmt(v)])


def read_beta(out_dir: str):
    with open(os.path.join(out_dir, "beta.csv"), newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([float(r["value"]) for r in rows]), [r["name"] for r in rows]


def write_path(out_dir: str, lambdas, betas, names=None, sigmas=None):
    betas = np.asarray(betas, dtype=float)
    names = _names(betas.shape[0], names)
    with _open(out_dir, "path.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda"] + (["sigma"] if sigmas is not None else []) + names)
        for i, lam in enumerate(lambdas):
            row = [fmt(lam)] + ([fmt(sigmas[i])] if sigmas is not None else [])
            w.writerow(row + [fmt(v) for v in betas[:, i]])


def read_path(out_dir: str):
    """``(lambdas, betas (d x m), sigmas or None, names)`` from ``path.csv``."""
    with open(os.path.join(out_dir, "path.csv"), newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    body = np.array([[float(c) for c in r] for r in rows[1:]]).reshape(len(rows) - 1, len(header))
    off = 2 if len(header) > 1 and header[1] == "sigma" else 1
    sig = body[:, 1].copy() if off == 2 else None
    return body[:, 0].copy(), body[:, off:].T.copy(), sig, header[off:]


def write_cv(out_dir: str, lambdas, mean_error, std_error):
    with _open(out_dir, "cv.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda", "mean_error", "std_error"])
        for row in zip(lambdas, mean_error, std_error):
            w.writerow([fmt(v) for v in row])


def read_cv(out_dir: str):
    header, t = read_table(os.path.join(out_dir, "cv.csv"))
    return t[:, 0].copy(), t[:, 1].copy(), t[:, 2].copy()


def write_stabsel(out_dir: str, frequencies, selected, names=None):
    freq = np.asarray(frequencies, dtype=float)
    names = _names(freq.size, names)
    sel = set(int(j) for j in selected)
    with _open(out_dir, "stabsel.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "name", "frequency", "selected"])
        for j, (nm, f) in enumerate(zip(names, freq)):
            w.writerow([j, nm, fmt(f), int(j in sel)])


def read_stabsel(out_dir: str):
    with open(os.path.join(out_dir, "stabsel.csv"), newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    freq = np.array([float(r["frequency"]) for r in rows])
    sel = np.array([int(r["feature"]) for r in rows if r["selected"] == "1"], dtype=int)
    return freq, sel, [r["name"] for r in rows]


def save_results(result, out_dir: str, summary: Optional[dict] = None, names=None) -> list:
    """Write ``result`` and ``summary`` into ``out_dir``; returns written paths.

    ``result`` may be a Solution, PathResult, CVResult or StabSelResult.
    A CVResult also writes the refit ``beta.csv``.
    """
    from .path import PathResult
    from .problem import Solution
    from .selection import CVResult, StabSelResult

    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out_dir}: {exc.strerror}") from exc
    files = []
    if isinstance(result, Solution):
        write_beta(out_dir, result.beta, names)
        files.append("beta.csv")
    elif isinstance(result, PathResult):
        write_path(out_dir, result.lambdas, result.betas, names, result.sigmas)
        files.append("path.csv")
    elif isinstance(result, CVResult):
        write_cv(out_dir, result.lambdas, result.mean_error, result.std_error)
        write_beta(out_dir, result.solution.beta, names)
        files += ["cv.csv", "beta.csv"]
    elif isinstance(result, StabSelResult):
        write_stabsel(out_dir, result.frequencies, result.selected, names)
        files.append("stabsel.csv")
    else:
        raise TypeError(f"cannot save {type(result).__name__}")
    if summary is not None:
        write_summary(out_dir, summary)
        files.append("summary.json")
    return [os.path.join(out_dir, f) for f in files]
