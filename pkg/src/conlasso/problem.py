"""Problem data, formulations and exact objective evaluation.

Every estimator in the package minimizes one of six objectives over the
coefficient vector ``beta`` (and, for the concomitant kinds, a scale
``sigma``) subject to ``C @ beta == 0``:

========  ==========================================================
R1        ``||X b - y||^2 + lam * ||b||_w1``
R2        ``h_rho(X b - y) + lam * ||b||_w1``
R3        ``||X b - y||^2 / s + (n / 2) s + lam * ||b||_w1``
R4        ``(h_rho((X b - y) / s) + n) s + lam * ||b||_w1``
C1        ``sum_i l(y_i x_i^T b) + lam * ||b||_w1``
C2        ``sum_i l_rho(y_i x_i^T b) + lam * ||b||_w1``
========  ==========================================================

``h_rho`` sums ``t**2`` on ``|t| <= rho`` and ``2 rho |t| - rho**2``
beyond, so that R2 tends to R1 as ``rho`` grows.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .errors import ProblemValidationError

SIGMA_FLOOR = 1e-12


class Kind(str, enum.Enum):
    R1 = "R1"
    R2 = "R2"
    R3 = "R3"
    R4 = "R4"
    C1 = "C1"
    C2 = "C2"

    @property
    def concomitant(self) -> bool:
        return self in (Kind.R3, Kind.R4)

    @property
    def classification(self) -> bool:
        return self in (Kind.C1, Kind.C2)

    @property
    def huber(self) -> bool:
        return self in (Kind.R2, Kind.R4, Kind.C2)


def _frozen(a: Any, ndim: int) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    if ndim == 2 and arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.size else arr.reshape(0, 0)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ProblemData:
    """Estimation input ``(X, y, C, weights)``.

    ``C`` may have zero rows (unconstrained). Arrays are copied and made
    read-only on construction; call :func:`validate` to check invariants.
    """

    X: np.ndarray
    y: np.ndarray
    C: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        X = _frozen(self.X, 2)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", _frozen(self.y, 1).ravel())
        d = X.shape[1] if X.ndim == 2 else 0
        if self.C is None or np.size(self.C) == 0:
            C = np.zeros((0, d))
            C.setflags(write=False)
        else:
            C = _frozen(self.C, 2)
        object.__setattr__(self, "C", C)
        if self.weights is None:
            w = np.ones(d)
            w.setflags(write=False)
        else:
            w = _frozen(self.weights, 1).ravel()
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def k(self) -> int:
        return self.C.shape[0]

    def subset(self, rows) -> "ProblemData":
        """Restrict to a subset of samples (used by CV and subsampling)."""
        rows = np.asarray(rows)
        return ProblemData(self.X[rows], self.y[rows], self.C, self.weights)


@dataclass(frozen=True)
class Formulation:
    kind: Kind = Kind.R3
    rho: float = 1.345
    rho_class: float = -1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if not self.rho > 0:
            raise ProblemValidationError([f"rho must be positive, got {self.rho}"])
        if not self.rho_class < 1:
            raise ProblemValidationError(
                [f"rho_class must be < 1, got {self.rho_class}"])


@dataclass(frozen=True)
class Solution:
    beta: np.ndarray
    objective: float
    sigma: Optional[float] = None
    dual_mu: Optional[np.ndarray] = None
    lam: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(np.abs(self.beta) > 1e-8)


def validate(problem: ProblemData, formulation: Formulation) -> ProblemData:
    """Check the problem invariants, returning the problem or raising.

    All violations are collected into a single
    :class:`~conlasso.errors.ProblemValidationError`.
    """
    errs = []
    X, y, C, w = problem.X, problem.y, problem.C, problem.weights
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        errs.append(f"X must be a non-empty matrix, got shape {X.shape}")
        raise ProblemValidationError(errs)
    n, d = X.shape
    if y.shape != (n,):
        errs.append(f"dimension mismatch: y has {y.size} entries, X has {n} rows")
    if C.ndim != 2 or C.shape[1] != d:
        errs.append(f"dimension mismatch: C has shape {C.shape}, expected (k, {d})")
    if w.shape != (d,):
        errs.append(f"dimension mismatch: weights has {w.size} entries, expected {d}")
    for name, arr in (("X", X), ("y", y), ("C", C), ("weights", w)):
        if not np.all(np.isfinite(arr)):
            errs.append(f"non-finite entry in {name}")
    if w.shape == (d,) and np.any(w <= 0):
        errs.append("weights must be strictly positive")
    if formulation.kind.classification and y.shape == (n,):
        if not np.all(np.isin(y, (-1.0, 1.0))):
            errs.append(f"{formulation.kind.value} requires labels in {{-1, +1}}")
    if errs:
        raise ProblemValidationError(errs)
    return problem


# --- losses -----------------------------------------------------------------

def huber_value(r, rho: float) -> float:
    r = np.abs(np.asarray(r, dtype=float))
    quad = r <= rho
    return float(np.sum(np.where(quad, r * r, 2.0 * rho * r - rho * rho)))


def huber_grad(r, rho: float) -> np.ndarray:
    return 2.0 * np.clip(np.asarray(r, dtype=float), -rho, rho)


def squared_hinge_value(margins) -> float:
    m = np.asarray(margins, dtype=float)
    return float(np.sum(np.where(m <= 1.0, (1.0 - m) ** 2, 0.0)))


def squared_hinge_grad(margins) -> np.ndarray:
    m = np.asarray(margins, dtype=float)
    return np.where(m <= 1.0, -2.0 * (1.0 - m), 0.0)


def huberized_hinge_value(margins, rho_class: float) -> float:
    m = np.asarray(margins, dtype=float)
    out = np.where(m >= 1.0, 0.0, (1.0 - m) ** 2)
    lin = m <= rho_class
    out = np.where(lin, (1.0 - rho_class) * (1.0 + rho_class - 2.0 * m), out)
    return float(np.sum(out))


def huberized_hinge_grad(margins, rho_class: float) -> np.ndarray:
    m = np.asarray(margins, dtype=float)
    g = np.where(m >= 1.0, 0.0, -2.0 * (1.0 - m))
    return np.where(m <= rho_class, -2.0 * (1.0 - rho_class), g)


def penalty_value(beta, weights, lam: float) -> float:
    return float(lam * np.sum(weights * np.abs(beta)))


def objective_value(problem: ProblemData, formulation: Formulation, beta,
                    sigma: Optional[float] = None, lam: float = 0.0) -> float:
    """Evaluate the formulation's objective at ``beta`` (and ``sigma``).

    The constraint ``C beta = 0`` is not checked here.
    """
    kind = formulation.kind
    beta = np.asarray(beta, dtype=float)
    X, y = problem.X, problem.y
    pen = penalty_value(beta, problem.weights, lam)
    if kind.concomitant:
        if sigma is None:
            raise ValueError(f"{kind.value} requires sigma")
        if not sigma > 0:
            raise ValueError(f"sigma must be positive, got {sigma}")
    elif sigma is not None and kind.classification:
        raise ValueError(f"{kind.value} takes no sigma")
    r = X @ beta - y
    if kind is Kind.R1:
        return float(r @ r) + pen
    if kind is Kind.R2:
        return huber_value(r, formulation.rho) + pen
    if kind is Kind.R3:
        return float(r @ r) / sigma + 0.5 * problem.n * sigma + pen
    if kind is Kind.R4:
        return (huber_value(r / sigma, formulation.rho) + problem.n) * sigma + pen
    m = y * (X @ beta)
    if kind is Kind.C1:
        return squared_hinge_value(m) + pen
    return huberized_hinge_value(m, formulation.rho_class) + pen


def loss_gradient(problem: ProblemData, formulation: Formulation, beta,
                  sigma: Optional[float] = None) -> np.ndarray:
    """Gradient in ``beta`` of the smooth (loss) part of the objective."""
    kind = formulation.kind
    X, y = problem.X, problem.y
    r = X @ beta - y
    if kind is Kind.R1:
        return 2.0 * X.T @ r
    if kind is Kind.R2:
        return X.T @ huber_grad(r, formulation.rho)
    if kind is Kind.R3:
        return 2.0 * X.T @ r / sigma
    if kind is Kind.R4:
        return X.T @ huber_grad(r / sigma, formulation.rho)
    m = y * (X @ beta)
    if kind is Kind.C1:
        return X.T @ (y * squared_hinge_grad(m))
    return X.T @ (y * huberized_hinge_grad(m, formulation.rho_class))


def concomitant_sigma(residual, n: int) -> float:
    """Minimizer over ``s > 0`` of ``||r||^2 / s + (n / 2) s``."""
    r = np.asarray(residual, dtype=float)
    return float(np.sqrt(2.0 / n) * np.linalg.norm(r))


def huber_concomitant_sigma(residual, rho: float) -> float:
    """Minimizer over ``s > 0`` of ``(h_rho(r / s) + n) s``.

    The function is convex and piecewise smooth in ``s``; on the piece where
    the samples with ``|r_i| <= rho s`` form the set Q its stationary point is
    ``s^2 = sum_Q r_i^2 / (n - rho^2 |Q^c|)``. Pieces are scanned in order.
    """
    a = np.sort(np.abs(np.asarray(residual, dtype=float)))
    n = a.size
    if n == 0 or a[-1] == 0.0:
        return 0.0
    # s in [a[m-1] / rho, a[m] / rho) puts the m smallest in Q.
    csum = np.concatenate(([0.0], np.cumsum(a * a)))
    for m in range(n, -1, -1):
        outside = n - m
        denom = n - rho * rho * outside
        if denom <= 0:
            break
        s = np.sqrt(csum[m] / denom)
        lo = a[m - 1] / rho if m > 0 else 0.0
        hi = a[m] / rho if m < n else np.inf
        if lo <= s <= hi:
            return float(s)
    # objective decreasing towards s -> 0 on the remaining pieces
    return 0.0
