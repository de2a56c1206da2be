"""Iterative solvers for a single regularization level.

* :func:`douglas_rachford` -- R1-R4; Huber kinds go through the mean-shift
  augmentation and the concomitant kinds use the perspective prox.
* :func:`ppds` -- projected splitting, R1/R2.
* :func:`pfpds` -- projection-free primal-dual (forward-backward-forward), R1/R2.
* :func:`oracle_solve` -- slow projected subgradient reference, all kinds.

The homotopy solver lives in :mod:`conlasso.path`.
"""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.optimize import linprog

from . import _backend
from .errors import IncompatibleMethodError, MaxIterExceeded
from .problem import (SIGMA_FLOOR, Formulation, Kind, ProblemData, Solution,
                      concomitant_sigma, huber_concomitant_sigma, huber_grad,
                      huberized_hinge_grad, loss_gradient, objective_value,
                      squared_hinge_grad, validate)
from .prox import factor_constraints, mean_shift_augment, spectral_norm_sq


class Method(str, enum.Enum):
    PATH_ALG = "PathAlg"
    DR = "DR"
    PPDS = "PPDS"
    PFPDS = "PFPDS"
    ORACLE = "Oracle"

    @classmethod
    def parse(cls, name) -> "Method":
        if isinstance(name, Method):
            return name
        key = str(name).lower().replace("-", "").replace("_", "")
        for m in cls:
            if m.value.lower() == key:
                return m
        raise ValueError(f"unknown method {name!r}")


_ITERATIVE = {Method.PATH_ALG, Method.DR, Method.PPDS, Method.PFPDS}
COMPATIBILITY = {
    Kind.R1: _ITERATIVE,
    Kind.R2: _ITERATIVE,
    Kind.R3: {Method.PATH_ALG, Method.DR},
    Kind.R4: {Method.DR},
    Kind.C1: {Method.PATH_ALG},
    Kind.C2: {Method.PATH_ALG},
}


def check_compatible(kind: Kind, method: Method) -> None:
    if method is Method.ORACLE:
        return
    if method not in COMPATIBILITY[Kind(kind)]:
        raise IncompatibleMethodError(Kind(kind).value, method.value)


@dataclass(frozen=True)
class SolverConfig:
    method: Optional[Method] = None
    max_iter: int = 100000
    tol: float = 1e-8
    path_lambda_min_ratio: float = 1e-2
    max_breakpoints: Optional[int] = None
    backend: Optional[str] = None

    def __post_init__(self):
        if self.method is not None:
            object.__setattr__(self, "method", Method.parse(self.method))
        if not 0 < self.path_lambda_min_ratio < 1:
            raise ValueError("path_lambda_min_ratio must lie in (0, 1)")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


DEFAULT_CONFIG = SolverConfig()


# --- lambda max ---------------------------------------------------------------

def minimax_shift(v, C, w=None):
    """``min_mu ||(v - C^T mu) / w||_inf`` and a minimizing ``mu``.

    A single constant constraint row reduces to the midrange; the general
    case is a small linear program.
    """
    v = np.asarray(v, dtype=float)
    d = v.size
    w = np.ones(d) if w is None else np.asarray(w, dtype=float)
    C = np.asarray(C, dtype=float).reshape(-1, d)
    k = C.shape[0]
    vw = v / w
    if k == 0 or not np.any(C):
        return float(np.max(np.abs(vw))) if d else 0.0, np.zeros(k)
    if k == 1 and np.all(C[0] == C[0, 0]) and np.all(w == w[0]):
        hi, lo = float(vw.max()), float(vw.min())
        shift = 0.5 * (hi + lo)  # in units of v / w
        return 0.5 * (hi - lo), np.array([shift * w[0] / C[0, 0]])
    Ct = C.T / w[:, None]
    # variables (mu, t); minimize t
    A_ub = np.block([[-Ct, -np.ones((d, 1))], [Ct, -np.ones((d, 1))]])
    b_ub = np.concatenate([-vw, vw])
    cost = np.zeros(k + 1)
    cost[-1] = 1.0
    bounds = [(None, None)] * k + [(0, None)]
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    mu = res.x[:k]
    return float(np.max(np.abs(vw - Ct @ mu))), mu


def null_sigma(problem: ProblemData, formulation: Formulation) -> Optional[float]:
    """Concomitant scale at ``beta = 0`` (``None`` for fixed-scale kinds)."""
    kind = formulation.kind
    if kind is Kind.R3:
        return concomitant_sigma(problem.y, problem.n)
    if kind is Kind.R4:
        return huber_concomitant_sigma(problem.y, formulation.rho)
    return None


def zero_gradient(problem: ProblemData, formulation: Formulation) -> np.ndarray:
    """Negative loss gradient at ``beta = 0``; lambda max is its dual norm."""
    kind = formulation.kind
    X, y = problem.X, problem.y
    if kind is Kind.R1:
        return 2.0 * X.T @ y
    if kind is Kind.R2:
        return -X.T @ huber_grad(-y, formulation.rho)
    if kind.concomitant:
        s = null_sigma(problem, formulation)
        if s <= 0:
            return np.zeros(problem.d)
        if kind is Kind.R3:
            return 2.0 * X.T @ y / s
        return -X.T @ huber_grad(-y / s, formulation.rho)
    zero = np.zeros(problem.n)
    if kind is Kind.C1:
        return -X.T @ (y * squared_hinge_grad(zero))
    return -X.T @ (y * huberized_hinge_grad(zero, formulation.rho_class))


def compute_lambda_max(problem: ProblemData, formulation: Formulation | None = None) -> float:
    """Reference level for rescaled penalties; ``beta = 0`` is optimal at and above it.

    For R2 this is the least-squares value ``min_mu ||2 X^T y - C^T mu||_inf``
    (so a proportion ``l`` means the same absolute level as for R1), raised
    to the Huber zero threshold when that is larger. Other kinds use their
    exact zero threshold.
    """
    formulation = formulation or Formulation(Kind.R1)
    lam0 = zero_threshold(problem, formulation)
    if formulation.kind is Kind.R2:
        ls = minimax_shift(2.0 * problem.X.T @ problem.y, problem.C, problem.weights)[0]
        return max(lam0, ls)
    return lam0


def zero_threshold(problem: ProblemData, formulation: Formulation) -> float:
    """Smallest ``lam`` at which ``beta = 0`` solves the problem."""
    v = zero_gradient(problem, formulation)
    return minimax_shift(v, problem.C, problem.weights)[0]


# --- certificates ---------------------------------------------------------------

def kkt_residual(problem: ProblemData, formulation: Formulation, beta, lam: float,
                 sigma: Optional[float] = None, active_tol: float = 1e-9):
    """Stationarity residual of ``beta`` at ``lam``, minimized over multipliers.

    Coordinates with ``|beta_j| > active_tol * max(1, ||beta||_inf)`` must
    satisfy ``g_j + lam w_j sign(beta_j) + (C^T mu)_j = 0``; the others
    ``|g_j + (C^T mu)_j| <= lam w_j``. Returns ``(residual, mu)`` where the
    residual is the smallest achievable max violation.
    """
    beta = np.asarray(beta, dtype=float)
    g = loss_gradient(problem, formulation, beta, sigma)
    w = problem.weights
    C = problem.C
    k, d = C.shape
    thr = active_tol * max(1.0, float(np.max(np.abs(beta))) if d else 1.0)
    act = np.abs(beta) > thr
    target = g + lam * w * np.sign(beta) * act
    slack = np.where(act, 0.0, lam * w)
    if k == 0:
        return float(np.max(np.maximum(np.abs(target) - slack, 0.0))), np.zeros(0)
    # |target_j + (C^T mu)_j| <= slack_j + t
    Ct = C.T
    A_ub = np.block([[Ct, -np.ones((d, 1))], [-Ct, -np.ones((d, 1))]])
    b_ub = np.concatenate([slack - target, slack + target])
    cost = np.zeros(k + 1)
    cost[-1] = 1.0
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub,
                  bounds=[(None, None)] * k + [(0, None)], method="highs")
    mu = res.x[:k]
    viol = np.maximum(np.abs(target + Ct @ mu) - slack, 0.0)
    return float(np.max(viol)), mu


def feasibility(problem: ProblemData, beta) -> float:
    if problem.k == 0:
        return 0.0
    return float(np.max(np.abs(problem.C @ beta)))


def support_project(beta, C):
    """Project onto ``{C b = 0}`` while keeping zero coordinates at zero."""
    beta = np.array(beta, dtype=float)
    if C.shape[0] == 0:
        return beta
    S = np.flatnonzero(beta)
    if S.size == 0:
        return beta
    CS = C[:, S]
    corr, *_ = np.linalg.lstsq(CS @ CS.T, CS @ beta[S], rcond=1e-12)
    beta[S] -= CS.T @ corr
    return beta


def _solution(problem, formulation, beta, sigma, lam, diag):
    obj = objective_value(problem, formulation, beta, sigma, lam)
    diag = dict(diag)
    diag["feasibility"] = feasibility(problem, beta)
    return Solution(beta=beta, objective=obj, sigma=sigma, lam=lam, diagnostics=diag)


def _finalize(sol: Solution, residual: float):
    if not sol.diagnostics["converged"]:
        raise MaxIterExceeded(sol, residual)
    return sol


def _kernels(config: SolverConfig):
    return _backend.get(config.backend)


def _loss_code(kind: Kind) -> int:
    return {Kind.R1: 0, Kind.R2: 1, Kind.R3: 0, Kind.R4: 1, Kind.C1: 2, Kind.C2: 3}[kind]


# --- Douglas-Rachford -----------------------------------------------------------

def dr_setup(problem: ProblemData, formulation: Formulation, lam: float):
    """Design, penalty vector, projection operator and ``||A N||`` for the DR loop.

    ``N`` spans the null space of the (augmented) constraints, so ``||A N||``
    is the operator norm on the feasible set.
    """
    kind = formulation.kind
    if kind in (Kind.R2, Kind.R4):
        if lam > 0:
            aug = mean_shift_augment(problem, formulation, lam)
            A, C, wl = aug.X_aug, aug.C_aug, lam * aug.weights_aug
            wl[problem.d:] = 2.0 * formulation.rho
        else:
            n = problem.n
            A = np.hstack([problem.X, np.eye(n)])
            C = np.hstack([problem.C, np.zeros((problem.k, n))])
            wl = np.concatenate([np.zeros(problem.d), np.full(n, 2.0 * formulation.rho)])
    else:
        A, C, wl = problem.X, problem.C, lam * problem.weights
    fac = factor_constraints(C, d=A.shape[1])
    AN = A @ fac.N
    M = np.eye(AN.shape[1]) + AN.T @ AN
    cf = scipy.linalg.cho_factor(M)
    K = fac.N @ scipy.linalg.cho_solve(cf, fac.N.T)
    norm = np.sqrt(spectral_norm_sq(AN)) if AN.size else 0.0
    return (np.ascontiguousarray(A), C, np.ascontiguousarray(wl), np.ascontiguousarray(K),
            norm)


def douglas_rachford(problem: ProblemData, formulation: Formulation, lam: float,
                     config: SolverConfig = DEFAULT_CONFIG, warm_start: Solution | None = None,
                     gamma: float | None = None) -> Solution:
    """Douglas-Rachford splitting between the separable loss/l1 prox and the
    affine set ``{u = A b - y, C b = 0}``.

    Concomitant kinds carry a scale variable whose joint prox with ``u`` is
    :func:`~conlasso.prox.prox_perspective_sq`.
    """
    kind = formulation.kind
    check_compatible(kind, Method.DR)
    validate(problem, formulation)
    t0 = time.perf_counter()
    A, C, wl, K, norm_an = dr_setup(problem, formulation, lam)
    y = np.ascontiguousarray(problem.y)
    conc = 1 if kind.concomitant else 0
    csig = {Kind.R3: 0.5 * problem.n, Kind.R4: float(problem.n)}.get(kind, 0.0)
    if gamma is None:
        gamma = 0.5 / max(norm_an, 1e-12)
    state = warm_start.diagnostics.get("dr_state") if warm_start is not None else None
    if state is not None and state[2].size == A.shape[1]:
        zs, zu, zb = state
    else:
        zb = np.zeros(A.shape[1])
        zu = -y.copy()
        zs = (null_sigma(problem, formulation) or 1.0) if conc else 0.0
    kern = _kernels(config)
    yb, ys, xb, zs, zu, zb, it, res = kern.dr_run(
        A, y, K, wl, conc, csig, float(gamma), float(zs), np.asarray(zu, float),
        np.asarray(zb, float), int(config.max_iter), float(config.tol))
    theta = support_project(np.asarray(yb), C)
    beta = theta[: problem.d]
    sigma = max(float(ys), SIGMA_FLOOR) if conc else None
    diag = dict(solver="DR", iterations=int(it), residual=float(res),
                wall_time=time.perf_counter() - t0,
                converged=bool(res <= config.tol * max(1.0, float(np.max(np.abs(yb))), abs(ys))),
                dr_state=(float(zs), np.asarray(zu), np.asarray(zb)),
                mean_shift=theta[problem.d:] if kind in (Kind.R2, Kind.R4) else None)
    return _finalize(_solution(problem, formulation, beta, sigma, lam, diag), res)


# --- projected / projection-free primal-dual -------------------------------------

def _smooth_setup(problem, formulation, method):
    kind = formulation.kind
    check_compatible(kind, method)
    validate(problem, formulation)
    L = 2.0 * spectral_norm_sq(problem.X)
    return _loss_code(kind), L


def ppds(problem: ProblemData, formulation: Formulation, lam: float,
         config: SolverConfig = DEFAULT_CONFIG, warm_start: Solution | None = None) -> Solution:
    """Projected splitting of smooth loss, weighted l1 and ``{C b = 0}``.

    Iterates ``xg = P z``, ``xh = prox(2 xg - z - tau grad(xg))``,
    ``z += xh - xg``; the null-space complement of ``z - xg`` is the scaled
    constraint multiplier. With ``k = 0`` this is proximal gradient descent.
    """
    code, L = _smooth_setup(problem, formulation, Method.PPDS)
    t0 = time.perf_counter()
    tau = 0.9 / L if L > 0 else 1.0
    fac = factor_constraints(problem.C, d=problem.d)
    z0 = warm_start.beta if warm_start is not None else np.zeros(problem.d)
    kern = _kernels(config)
    xh, z, it, res = kern.ppds_run(
        np.ascontiguousarray(problem.X), np.ascontiguousarray(problem.y),
        np.ascontiguousarray(fac.Q), np.ascontiguousarray(lam * problem.weights),
        code, float(formulation.rho), float(tau), np.array(z0, dtype=float),
        int(config.max_iter), float(config.tol))
    xh = np.asarray(xh)
    beta = support_project(xh, problem.C)
    mu = None
    if fac.rank:
        xg = fac.project(np.asarray(z))
        mu = -np.linalg.lstsq(problem.C.T, (np.asarray(z) - xg) / tau, rcond=None)[0]
    diag = dict(solver="PPDS", iterations=int(it), residual=float(res), step=tau,
                wall_time=time.perf_counter() - t0,
                converged=bool(res <= config.tol * max(1.0, float(np.max(np.abs(xh))))))
    sol = _solution(problem, formulation, beta, None, lam, diag)
    sol = replace(sol, dual_mu=mu)
    return _finalize(sol, res)


def pfpds(problem: ProblemData, formulation: Formulation, lam: float,
          config: SolverConfig = DEFAULT_CONFIG, warm_start: Solution | None = None) -> Solution:
    """Primal-dual forward-backward-forward iterations; ``C b = 0`` is handled
    only through its multiplier, never by projection.

    The constraint rows are rescaled so that ``||C||`` matches the loss
    Lipschitz constant, which balances primal and dual progress.
    """
    code, L = _smooth_setup(problem, formulation, Method.PFPDS)
    t0 = time.perf_counter()
    # the multiplier is only approximate at the stop, so exact zeros at the threshold
    # are not identified by the iteration; screen them with the exact threshold
    lam0, mu0 = minimax_shift(zero_gradient(problem, formulation), problem.C, problem.weights)
    if lam >= lam0:
        diag = dict(solver="PFPDS", iterations=0, residual=0.0, step=None, screened=True,
                    wall_time=time.perf_counter() - t0, pf_dual=None, converged=True)
        sol = _solution(problem, formulation, np.zeros(problem.d), None, lam, diag)
        return replace(sol, dual_mu=np.asarray(mu0) if problem.k else None)
    C = problem.C
    cn = np.sqrt(spectral_norm_sq(C)) if problem.k else 0.0
    scale = 0.5 * L / cn if cn > 0 else 1.0
    Cs = np.ascontiguousarray(C * scale).reshape(problem.k, problem.d)
    gamma = 0.9 / (L + scale * cn) if L > 0 else 1.0
    if warm_start is not None:
        x0 = np.array(warm_start.beta, dtype=float)
        v0 = warm_start.diagnostics.get("pf_dual")
        v0 = np.zeros(problem.k) if v0 is None else np.array(v0, dtype=float)
    else:
        x0, v0 = np.zeros(problem.d), np.zeros(problem.k)
    kern = _kernels(config)
    p1, x, v, it, res = kern.pfpds_run(
        np.ascontiguousarray(problem.X), np.ascontiguousarray(problem.y), Cs,
        np.ascontiguousarray(lam * problem.weights), code, float(formulation.rho),
        float(gamma), x0, v0, int(config.max_iter), float(config.tol))
    beta = np.array(p1)
    diag = dict(solver="PFPDS", iterations=int(it), residual=float(res), step=gamma,
                wall_time=time.perf_counter() - t0, pf_dual=np.asarray(v),
                converged=bool(res <= config.tol * max(1.0, float(np.max(np.abs(beta))))))
    sol = _solution(problem, formulation, beta, None, lam, diag)
    sol = replace(sol, dual_mu=np.asarray(v) * scale if problem.k else None)
    return _finalize(sol, res)


# --- reference oracle ----------------------------------------------------------

def oracle_solve(problem: ProblemData, formulation: Formulation, lam: float,
                 budget: int = 60000, config: SolverConfig = DEFAULT_CONFIG,
                 polish: bool = True) -> Solution:
    """Projected subgradient reference solver (tests and cross-checks only).

    Runs ``budget`` iterations from ``beta = 0`` in epochs of 1000 steps with
    diminishing steps, restarting each epoch from the best point. For R3/R4
    the scale is set by golden-section search at every step. Always returns
    the best point found; ``diagnostics["history"]`` holds the per-epoch
    best objective. With ``polish`` the support of that point seeds an
    active-set refinement, kept only when it lowers the objective.
    """
    validate(problem, formulation)
    kind = formulation.kind
    t0 = time.perf_counter()
    X, y = problem.X, problem.y
    A = (y[:, None] * X) if kind.classification else X
    code = _loss_code(kind)
    rho = formulation.rho_class if kind is Kind.C2 else formulation.rho
    conc = {Kind.R3: 1, Kind.R4: 2}.get(kind, 0)
    csig = {Kind.R3: 0.5 * problem.n, Kind.R4: float(problem.n)}.get(kind, 0.0)
    fac = factor_constraints(problem.C, d=problem.d)
    xn = np.sqrt(spectral_norm_sq(X))
    scale = np.linalg.norm(y) if not kind.classification else np.sqrt(problem.n)
    a0 = scale / xn if xn > 0 else 1.0
    per_epoch = 1000
    epochs = max(1, int(budget) // per_epoch)
    kern = _kernels(config)
    b, s, f, hist = kern.subgrad_run(
        np.ascontiguousarray(A), np.ascontiguousarray(y), np.ascontiguousarray(fac.Q),
        np.ascontiguousarray(lam * problem.weights), code, float(rho), conc, csig,
        float(a0), epochs, per_epoch, 0.75)
    beta = np.asarray(b)
    sigma = max(float(s), SIGMA_FLOOR) if conc else None
    polished = False
    if polish:
        cand = _polish(problem, formulation, beta, sigma, lam)
        if cand is not None:
            beta, sigma, polished = cand[0], cand[1], True
    diag = dict(solver="Oracle", iterations=epochs * per_epoch, converged=True,
                history=np.asarray(hist), polished=polished,
                wall_time=time.perf_counter() - t0)
    return _solution(problem, formulation, beta, sigma, lam, diag)


def _pieces_at(kind: Kind, u, y, rho, rho_class):
    """Curvature flag, target and slope of each sample's loss piece at ``u``."""
    n = u.size
    q = np.ones(n)
    t = np.ones(n) if kind.classification else np.array(y, dtype=float)
    c = np.zeros(n)
    if kind.huber:
        r = u - y
        lin = np.abs(r) > rho
        q[lin] = 0.0
        c[lin] = 2.0 * rho * np.sign(r[lin])
    elif kind is Kind.C1:
        q[u >= 1.0] = 0.0
    elif kind is Kind.C2:
        q[u >= 1.0] = 0.0
        low = u <= rho_class
        q[low] = 0.0
        c[low] = -2.0 * (1.0 - rho_class)
    return q, t, c


def _polish_fixed(problem, formulation, beta, lam, rho, max_rounds=50):
    """Sign-fixed equality-constrained Newton solve on the support of ``beta``."""
    kind = formulation.kind
    A = (problem.y[:, None] * problem.X) if kind.classification else problem.X
    S = np.flatnonzero(beta)
    s = np.sign(beta[S])
    AS, CS = A[:, S], problem.C[:, S]
    k, m = CS.shape
    rhs_pen = lam * problem.weights[S] * s
    b = beta[S].copy()
    prev = None
    for _ in range(max_rounds):
        q, t, c = _pieces_at(kind, AS @ b, problem.y, rho, formulation.rho_class)
        key = (q.tobytes(), c.tobytes())
        if key == prev:
            break
        prev = key
        Aq = AS * q[:, None]
        M = np.zeros((m + k, m + k))
        M[:m, :m] = 2.0 * Aq.T @ AS
        M[:m, m:] = CS.T
        M[m:, :m] = CS
        rhs = np.concatenate([2.0 * Aq.T @ t - AS.T @ c - rhs_pen, np.zeros(k)])
        b = np.linalg.lstsq(M, rhs, rcond=1e-12)[0][:m]
    if np.any(np.sign(b) != s):
        return None
    out = np.zeros(problem.d)
    out[S] = b
    return out


def _polish(problem, formulation, beta, sigma, lam):
    """Refine a subgradient point by solving the stationarity system on its support.

    Supports are taken at several relative magnitude cutoffs; a candidate is
    accepted only if it is sign consistent, feasible, and lowers the
    objective. Concomitant kinds alternate the fixed-scale solve with the
    exact scale update.
    """
    kind = formulation.kind
    best_f = objective_value(problem, formulation, beta, sigma, lam)
    best = None
    top = float(np.max(np.abs(beta))) if beta.size else 0.0
    if top == 0.0:
        return None
    for cut in (1e-2, 1e-3, 1e-4, 1e-6):
        cand = np.where(np.abs(beta) > cut * top, beta, 0.0)
        sg = sigma
        for _ in range(20 if kind.concomitant else 1):
            lam_eff, rho = lam, formulation.rho
            if kind.concomitant:
                lam_eff, rho = lam * sg, formulation.rho * sg
            nxt = _polish_fixed(problem, formulation, cand, lam_eff, rho)
            if nxt is None:
                break
            cand = nxt
            if kind.concomitant:
                r = problem.X @ cand - problem.y
                sg = max(concomitant_sigma(r, problem.n) if kind is Kind.R3
                         else huber_concomitant_sigma(r, formulation.rho), SIGMA_FLOOR)
        else:
            if feasibility(problem, cand) <= 1e-10 * (1.0 + float(np.max(np.abs(cand)))):
                f = objective_value(problem, formulation, cand, sg, lam)
                if f <= best_f:
                    best_f, best = f, (cand, sg)
            continue
    return best
