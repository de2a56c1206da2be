"""Proximity operators and linear-algebra helpers shared by the solvers."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .problem import Formulation, Kind, ProblemData


def soft_threshold(v, tau):
    """Componentwise ``sign(v) * max(|v| - tau, 0)``; ``tau`` may be a vector."""
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


@dataclass(frozen=True)
class ConstraintFactorization:
    """Orthonormal bases of the row space and null space of ``C``.

    ``Q`` (rank x d) spans the row space, ``N`` (d x (d - rank)) the null
    space, so the projector onto ``{b : C b = 0}`` is ``I - Q^T Q``.
    """

    C: np.ndarray
    rank: int
    Q: np.ndarray
    N: np.ndarray

    def project(self, v):
        v = np.asarray(v, dtype=float)
        if self.rank == 0:
            return v.copy()
        return v - self.Q.T @ (self.Q @ v)

    def matrix(self) -> np.ndarray:
        d = self.C.shape[1]
        return np.eye(d) - self.Q.T @ self.Q


def factor_constraints(C, d: int | None = None, drop_tol: float = 1e-10):
    C = np.asarray(C, dtype=float)
    if C.size == 0:
        if d is None:
            d = C.shape[1] if C.ndim == 2 else 0
        return ConstraintFactorization(np.zeros((0, d)), 0, np.zeros((0, d)), np.eye(d))
    d = C.shape[1]
    _, s, Vt = np.linalg.svd(C, full_matrices=True)
    rank = int(np.sum(s > drop_tol * s[0])) if s.size and s[0] > 0 else 0
    Q = Vt[:rank].copy()
    N = Vt[rank:].T.copy()
    return ConstraintFactorization(C, rank, Q, N)


def _cubic(s, eta, gamma, unorm2):
    return (s - eta) * (s + 2.0 * gamma) ** 2 - gamma * unorm2


def prox_perspective_sq(eta: float, u, gamma: float):
    """Prox of ``gamma * P`` at ``(eta, u)`` where ``P(s, x) = ||x||^2 / s``.

    Returns ``(sigma, p)``. The nonzero branch solves
    ``(s - eta)(s + 2 gamma)^2 = gamma ||u||^2`` for ``s > max(eta, 0)``
    with Newton steps kept inside a shrinking bracket.
    """
    u = np.asarray(u, dtype=float)
    unorm2 = float(u @ u)
    if eta + unorm2 / (4.0 * gamma) <= 0.0:
        return 0.0, np.zeros_like(u)
    s = cubic_root(eta, gamma, unorm2)
    return s, u * (s / (s + 2.0 * gamma))


def cubic_root(eta: float, gamma: float, unorm2: float, tol: float = 1e-12) -> float:
    lo = max(eta, 0.0)
    hi = lo + math.sqrt(gamma * unorm2) + 1.0
    if unorm2 == 0.0:
        return lo
    s = hi
    scale = max(1.0, gamma * unorm2)
    for _ in range(200):
        f = _cubic(s, eta, gamma, unorm2)
        if abs(f) <= tol * scale:
            break
        if f > 0:
            hi = s
        else:
            lo = s
        df = (s + 2.0 * gamma) * (3.0 * s - 2.0 * eta + 2.0 * gamma)
        step = s - f / df if df > 0 else 0.5 * (lo + hi)
        s = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    return s


@dataclass(frozen=True)
class AugmentedProblem:
    """Mean-shift form of a Huber problem: design ``[X | I]`` in ``d + n`` dims.

    The shift block ``o`` carries penalty weight ``2 rho / lam`` so that the
    augmented l1 term equals ``lam ||b||_w1 + 2 rho ||o||_1``.
    """

    X_aug: np.ndarray
    weights_aug: np.ndarray
    C_aug: np.ndarray
    d: int
    n: int

    def map_back(self, theta):
        theta = np.asarray(theta)
        return theta[: self.d], theta[self.d:]

    def as_problem(self, y) -> ProblemData:
        return ProblemData(self.X_aug, y, self.C_aug, self.weights_aug)


def mean_shift_augment(problem: ProblemData, formulation: Formulation,
                       lam: float) -> AugmentedProblem:
    if formulation.kind not in (Kind.R2, Kind.R4):
        raise ValueError("mean-shift augmentation applies to R2 and R4 only")
    if not lam > 0:
        raise ValueError("mean-shift augmentation needs lam > 0")
    n, d = problem.n, problem.d
    X_aug = np.hstack([problem.X, np.eye(n)])
    w_aug = np.concatenate([problem.weights, np.full(n, 2.0 * formulation.rho / lam)])
    C_aug = np.hstack([problem.C, np.zeros((problem.k, n))])
    return AugmentedProblem(X_aug, w_aug, C_aug, d, n)


def spectral_norm_sq(X, max_iter: int = 1000, tol: float = 1e-12,
                     return_history: bool = False):
    """Largest eigenvalue of ``X^T X`` by power iteration.

    The start vector is deterministic (all ones plus a fixed ramp) so that
    results are reproducible bit for bit.
    """
    X = np.asarray(X, dtype=float)
    d = X.shape[1]
    hist = []
    if X.size == 0 or not np.any(X):
        return (0.0, hist) if return_history else 0.0
    v = 1.0 + np.arange(d) / max(d, 1)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = X.T @ (X @ v)
        new = float(v @ w)  # Rayleigh quotient of the unit vector v
        hist.append(new)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            break
        v = w / nw
        if abs(new - est) <= tol * new:
            est = new
            break
        est = new
    # final Rayleigh quotient of the last normalized iterate
    est = max(est, float(v @ (X.T @ (X @ v))))
    return (est, hist) if return_history else est
