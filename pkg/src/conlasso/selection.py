"""Computation modes: fixed lambda, path, cross-validation, stability selection."""
from __future__ import annotations

import enum
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.stats import norm

from .errors import FoldTooSmall, MaxIterExceeded, SubsampleTooSmall
from .path import PathResult, path_alg, path_solve
from .problem import (Formulation, Kind, ProblemData, Solution, huberized_hinge_value,
                      squared_hinge_value, validate)
from .rng import SplitMix64
from .solvers import (COMPATIBILITY, DEFAULT_CONFIG, Method, SolverConfig, check_compatible,
                      compute_lambda_max, douglas_rachford, oracle_solve, pfpds, ppds)

NONZERO_TOL = 1e-8
SMALL_LAM_RATIO = 0.05


class Task(str, enum.Enum):
    FIXED = "fixed"
    PATH = "path"
    CV = "cv"
    STABSEL = "stabsel"


class CVRule(str, enum.Enum):
    MIN = "MinMSE"
    ONE_SE = "OneSE"

    @classmethod
    def parse(cls, name) -> "CVRule":
        if isinstance(name, CVRule):
            return name
        key = str(name).lower().replace("-", "").replace("_", "")
        if key in ("min", "minmse"):
            return cls.MIN
        if key in ("1se", "onese"):
            return cls.ONE_SE
        raise ValueError(f"unknown CV rule {name!r}")


class StabSelMode(str, enum.Enum):
    FIXED_LAM = "FixedLam"
    FIRST_Q = "FirstQ"
    MAX_COEF = "MaxCoef"

    @classmethod
    def parse(cls, name) -> "StabSelMode":
        if isinstance(name, StabSelMode):
            return name
        key = str(name).lower().replace("-", "").replace("_", "")
        for m in cls:
            if m.value.lower() == key:
                return m
        raise ValueError(f"unknown stability selection mode {name!r}")


def theory_lambda_ratio(n: int, d: int) -> float:
    """Scale-free default level ``sqrt(2 / n) * Phi^{-1}(1 - 0.05 / (2 d))``,
    used as the proportion ``l`` of lambda max (clipped to 1)."""
    return min(1.0, math.sqrt(2.0 / n) * float(norm.ppf(1.0 - 0.05 / (2.0 * d))))


@dataclass(frozen=True)
class FixedLambdaPlan:
    """``lam`` is a proportion of lambda max when ``rescaled``; ``"theory"``
    selects :func:`theory_lambda_ratio`."""

    lam: Union[float, str] = 0.1
    rescaled: bool = True

    def __post_init__(self):
        if isinstance(self.lam, str):
            if self.lam != "theory":
                raise ValueError("lam must be a number or 'theory'")
        elif self.lam < 0 or (self.rescaled and self.lam > 1):
            raise ValueError("rescaled lam must lie in [0, 1]; absolute lam must be >= 0")


@dataclass(frozen=True)
class PathPlan:
    lambda_min_ratio: float = 1e-2
    num_grid: int = 40


@dataclass(frozen=True)
class CVPlan:
    folds: int = 5
    grid_size: int = 80
    rule: CVRule = CVRule.ONE_SE
    seed: int = 0
    lambda_min_ratio: float = 1e-2

    def __post_init__(self):
        object.__setattr__(self, "rule", CVRule.parse(self.rule))
        if self.folds < 2:
            raise ValueError("need at least 2 folds")
        if self.grid_size < 2:
            raise ValueError("need at least 2 grid points")


@dataclass(frozen=True)
class StabSelPlan:
    mode: StabSelMode = StabSelMode.FIRST_Q
    q: int = 10
    B: int = 50
    subsample_fraction: float = 0.5
    threshold: float = 0.7
    seed: int = 0
    lam: Union[float, str] = 0.1
    rescaled: bool = True
    lambda_min_ratio: float = 1e-2

    def __post_init__(self):
        object.__setattr__(self, "mode", StabSelMode.parse(self.mode))
        if not 0 <= self.threshold <= 1:
            raise ValueError("threshold must lie in [0, 1]")
        if self.threshold < 0.5:
            warnings.warn("stability threshold below 0.5 admits unstable features", stacklevel=2)
        if self.B < 1 or self.q < 1:
            raise ValueError("B and q must be positive")
        if not 0 < self.subsample_fraction <= 1:
            raise ValueError("subsample_fraction must lie in (0, 1]")


@dataclass(frozen=True)
class ModelSelectionPlan:
    fixed_lambda: Optional[FixedLambdaPlan] = None
    path: Optional[PathPlan] = None
    cv: Optional[CVPlan] = None
    stabsel: Optional[StabSelPlan] = None

    def __post_init__(self):
        if not any((self.fixed_lambda, self.path, self.cv, self.stabsel)):
            raise ValueError("at least one computation mode must be on")


@dataclass(frozen=True)
class CVResult:
    lambdas: np.ndarray
    mean_error: np.ndarray
    std_error: np.ndarray
    lambda_min: float
    lambda_1se: float
    rule: CVRule
    solution: Solution
    lambda_max: float
    misclassification: Optional[np.ndarray] = None
    fold_errors: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def lambda_chosen(self) -> float:
        return self.lambda_1se if self.rule is CVRule.ONE_SE else self.lambda_min


@dataclass(frozen=True)
class StabSelResult:
    frequencies: np.ndarray
    threshold: float
    selected: np.ndarray
    subsample_sets: list
    mode: StabSelMode
    lam: Optional[float] = None
    profile_lambdas: Optional[np.ndarray] = None
    profile: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)


# --- method choice and single solves ----------------------------------------------

def default_method_for(formulation: Formulation, task, lam_ratio: Optional[float] = None) -> Method:
    """Automatic solver for a formulation and computation mode."""
    kind = formulation.kind
    task = Task(task)
    path_like = task is not Task.FIXED
    if kind.classification:
        return Method.PATH_ALG
    if kind is Kind.R4:
        return Method.DR
    if kind is Kind.R3:
        return Method.PATH_ALG if path_like else Method.DR
    if path_like or (lam_ratio is not None and lam_ratio >= SMALL_LAM_RATIO):
        return Method.PATH_ALG
    return Method.DR


def _method(formulation, task, lam_ratio, config):
    m = config.method if config.method is not None else default_method_for(formulation, task, lam_ratio)
    check_compatible(formulation.kind, m)
    return m


def solve(problem: ProblemData, formulation: Formulation, lam: float, method: Method,
          config: SolverConfig = DEFAULT_CONFIG, warm_start: Optional[Solution] = None) -> Solution:
    method = Method.parse(method)
    check_compatible(formulation.kind, method)
    if method is Method.PATH_ALG:
        return path_solve(problem, formulation, lam, config)
    if method is Method.DR:
        return douglas_rachford(problem, formulation, lam, config, warm_start=warm_start)
    if method is Method.PPDS:
        return ppds(problem, formulation, lam, config, warm_start=warm_start)
    if method is Method.PFPDS:
        return pfpds(problem, formulation, lam, config, warm_start=warm_start)
    return oracle_solve(problem, formulation, lam, config=config)


def resolve_lambda(problem, formulation, lam, rescaled):
    """``(absolute lam, lam_max, proportion or None)``."""
    lam_max = compute_lambda_max(problem, formulation)
    if lam == "theory":
        lam, rescaled = theory_lambda_ratio(problem.n, problem.d), True
    if rescaled:
        return float(lam) * lam_max, lam_max, float(lam)
    ratio = float(lam) / lam_max if lam_max > 0 else None
    return float(lam), lam_max, ratio


def run_fixed_lambda(problem: ProblemData, formulation: Formulation,
                     plan: Union[ModelSelectionPlan, FixedLambdaPlan] = FixedLambdaPlan(),
                     config: SolverConfig = DEFAULT_CONFIG) -> Solution:
    if isinstance(plan, ModelSelectionPlan):
        if plan.fixed_lambda is None:
            raise ValueError("fixed-lambda mode is off in this plan")
        plan = plan.fixed_lambda
    validate(problem, formulation)
    t0 = time.perf_counter()
    lam, lam_max, ratio = resolve_lambda(problem, formulation, plan.lam, plan.rescaled)
    method = _method(formulation, Task.FIXED, ratio, config)
    sol = solve(problem, formulation, lam, method, config)
    sol.diagnostics.update(lambda_max=lam_max, lam_ratio=ratio, method=method.value,
                           wall_time=time.perf_counter() - t0)
    return sol


# --- paths ------------------------------------------------------------------------------

def log_grid(lam_max: float, ratio: float, num: int) -> np.ndarray:
    """``num`` log-spaced levels from ``lam_max`` down to ``ratio * lam_max``."""
    return lam_max * np.logspace(0.0, math.log10(ratio), num)


def grid_path(problem: ProblemData, formulation: Formulation, lambdas, method: Method,
              config: SolverConfig = DEFAULT_CONFIG, strict: bool = True) -> PathResult:
    """Warm-started solves along a decreasing grid.

    With ``strict=False`` a solve that hits ``max_iter`` keeps its last
    iterate and is counted in ``diagnostics["unconverged"]``.
    """
    t0 = time.perf_counter()
    sols, warm, missed = [], None, 0
    for lam in lambdas:
        try:
            warm = solve(problem, formulation, float(lam), method, config, warm_start=warm)
        except MaxIterExceeded as exc:
            if strict:
                raise
            warm, missed = exc.solution, missed + 1
        sols.append(warm)
    betas = np.column_stack([s.beta for s in sols])
    sigmas = np.array([s.sigma for s in sols]) if formulation.kind.concomitant else None
    lam_max = compute_lambda_max(problem, formulation)
    return PathResult(np.asarray(lambdas, dtype=float), betas, formulation.kind, lam_max,
                      sigmas=sigmas, method=method.value,
                      diagnostics=dict(wall_time=time.perf_counter() - t0, unconverged=missed,
                                       iterations=[s.diagnostics.get("iterations") for s in sols]))


def run_path(problem: ProblemData, formulation: Formulation,
             plan: Union[ModelSelectionPlan, PathPlan] = PathPlan(),
             config: SolverConfig = DEFAULT_CONFIG, lam_min: Optional[float] = None,
             stop_after_entries: Optional[int] = None, strict: bool = True) -> PathResult:
    """Path-Alg when the formulation allows it, otherwise a warm-started grid
    (see :func:`grid_path` for ``strict``)."""
    if isinstance(plan, ModelSelectionPlan):
        if plan.path is None:
            raise ValueError("path mode is off in this plan")
        plan = plan.path
    validate(problem, formulation)
    method = _method(formulation, Task.PATH, None, config)
    if method is Method.PATH_ALG:
        cfg = SolverConfig(**{**config.__dict__, "path_lambda_min_ratio": plan.lambda_min_ratio})
        return path_alg(problem, formulation, cfg, lam_min=lam_min,
                        stop_after_entries=stop_after_entries)
    lam_max = compute_lambda_max(problem, formulation)
    ratio = plan.lambda_min_ratio if lam_min is None else max(lam_min / lam_max, 1e-12)
    return grid_path(problem, formulation, log_grid(lam_max, ratio, plan.num_grid), method, config,
                     strict=strict)


def _path_on_grid(problem, formulation, grid, method, config):
    """Solutions (d x len(grid)) at every grid level, via one path when possible,
    and the number of grid solves that missed the tolerance."""
    if method is Method.PATH_ALG:
        pth = path_alg(problem, formulation, config, lam_min=float(grid[-1]))
        return np.column_stack([pth.solution_at(float(l))[0] for l in grid]), 0
    pth = grid_path(problem, formulation, grid, method, config, strict=False)
    return pth.betas, pth.diagnostics["unconverged"]


# --- cross-validation --------------------------------------------------------------------

def cv_folds(n: int, folds: int, seed: int) -> np.ndarray:
    """Fold label per sample: a seeded uniform shuffle dealt round-robin."""
    perm = SplitMix64(seed).permutation(n)
    labels = np.empty(n, dtype=int)
    labels[perm] = np.arange(n) % folds
    return labels


def heldout_error(problem: ProblemData, formulation: Formulation, beta):
    """Mean held-out error and, for classification, the 0/1 error rate."""
    pred = problem.X @ beta
    if not formulation.kind.classification:
        return float(np.mean((pred - problem.y) ** 2)), None
    m = problem.y * pred
    if formulation.kind is Kind.C1:
        loss = squared_hinge_value(m)
    else:
        loss = huberized_hinge_value(m, formulation.rho_class)
    return loss / problem.n, float(np.mean(m <= 0))


def _map(fn, items, threads):
    if threads is None or threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def run_cv(problem: ProblemData, formulation: Formulation,
           plan: Union[ModelSelectionPlan, CVPlan] = CVPlan(),
           config: SolverConfig = DEFAULT_CONFIG, threads: Optional[int] = None) -> CVResult:
    """k-fold cross-validation over a log grid anchored at the full-data lambda max.

    Standard errors are ``std(fold errors, ddof=1) / sqrt(folds)``. The 1SE
    level is the largest grid value whose mean error is within one standard
    error (taken at the minimizer) of the minimum.
    """
    if isinstance(plan, ModelSelectionPlan):
        if plan.cv is None:
            raise ValueError("cross-validation mode is off in this plan")
        plan = plan.cv
    validate(problem, formulation)
    t0 = time.perf_counter()
    n, K = problem.n, plan.folds
    if K > n:
        raise FoldTooSmall(f"{K} folds requested for {n} samples")
    labels = cv_folds(n, K, plan.seed)
    for f in range(K):
        n_train = int(np.sum(labels != f))
        if n_train < 2:
            raise FoldTooSmall(f"fold {f} leaves {n_train} training samples")
    method = _method(formulation, Task.CV, None, config)
    lam_max = compute_lambda_max(problem, formulation)
    grid = log_grid(lam_max, plan.lambda_min_ratio, plan.grid_size)

    def fold_task(f):
        tr = np.flatnonzero(labels != f)
        te = np.flatnonzero(labels == f)
        train, test = problem.subset(tr), problem.subset(te)
        B, missed = _path_on_grid(train, formulation, grid, method, config)
        errs = [heldout_error(test, formulation, B[:, i]) for i in range(grid.size)]
        return (np.array([e[0] for e in errs]),
                np.array([e[1] if e[1] is not None else np.nan for e in errs]), missed)

    out = _map(fold_task, range(K), threads)
    E = np.vstack([o[0] for o in out])
    M01 = np.vstack([o[1] for o in out])
    mean = E.mean(axis=0)
    se = E.std(axis=0, ddof=1) / math.sqrt(K)
    i_min = int(np.argmin(mean))
    bound = mean[i_min] + se[i_min]
    i_1se = int(np.flatnonzero(mean <= bound)[0])
    lam_min_cv, lam_1se = float(grid[i_min]), float(grid[i_1se])
    chosen = lam_1se if plan.rule is CVRule.ONE_SE else lam_min_cv
    refit_method = _method(formulation, Task.CV, chosen / lam_max if lam_max > 0 else None, config)
    sol = solve(problem, formulation, chosen, refit_method, config)
    sol.diagnostics.update(lambda_max=lam_max, cv_wall_time=time.perf_counter() - t0,
                           method=refit_method.value)
    mis = None if not formulation.kind.classification else M01.mean(axis=0)
    return CVResult(grid, mean, se, lam_min_cv, lam_1se, plan.rule, sol, lam_max,
                    misclassification=mis, fold_errors=E,
                    diagnostics=dict(unconverged=int(sum(o[2] for o in out))))


# --- stability selection ------------------------------------------------------------

def subsample_indices(n: int, m: int, seed: int, b: int) -> np.ndarray:
    return np.sort(SplitMix64(seed).spawn(b).sample(n, m))


def _select(problem, formulation, plan: StabSelPlan, config, method_path, method_fixed):
    """Feature set chosen on one subsample and the number of solves that
    missed the tolerance (their last iterates are used)."""
    if plan.mode is StabSelMode.FIXED_LAM:
        lam, _, _ = resolve_lambda(problem, formulation, plan.lam, plan.rescaled)
        try:
            sol, missed = solve(problem, formulation, lam, method_fixed, config), 0
        except MaxIterExceeded as exc:
            sol, missed = exc.solution, 1
        return np.flatnonzero(np.abs(sol.beta) > NONZERO_TOL), missed
    pp = PathPlan(lambda_min_ratio=plan.lambda_min_ratio)
    cfg = SolverConfig(**{**config.__dict__, "method": method_path})
    if plan.mode is StabSelMode.FIRST_Q:
        pth = run_path(problem, formulation, pp, cfg, strict=False,
                       stop_after_entries=plan.q if method_path is Method.PATH_ALG else None)
        order = pth.entry_order(NONZERO_TOL)[: plan.q]
        return np.array(order, dtype=int), pth.diagnostics.get("unconverged", 0)
    pth = run_path(problem, formulation, pp, cfg, strict=False)
    peak = np.max(np.abs(pth.betas), axis=1)
    order = np.argsort(-peak, kind="stable")
    top = [int(j) for j in order[: plan.q] if peak[j] > NONZERO_TOL]
    return np.array(sorted(top), dtype=int), pth.diagnostics.get("unconverged", 0)


def run_stability_selection(problem: ProblemData, formulation: Formulation,
                            plan: Union[ModelSelectionPlan, StabSelPlan] = StabSelPlan(),
                            config: SolverConfig = DEFAULT_CONFIG,
                            threads: Optional[int] = None) -> StabSelResult:
    """Selection frequencies over ``B`` seeded half-samples.

    FixedLam keeps the nonzeros at the resolved level (a proportion refers to
    each subsample's own lambda max); FirstQ keeps the first ``q`` features to
    enter the path; MaxCoef keeps the ``q`` largest peak magnitudes along it.
    """
    if isinstance(plan, ModelSelectionPlan):
        if plan.stabsel is None:
            raise ValueError("stability selection mode is off in this plan")
        plan = plan.stabsel
    validate(problem, formulation)
    t0 = time.perf_counter()
    n, d = problem.n, problem.d
    m = int(math.floor(plan.subsample_fraction * n))
    if m < 2:
        raise SubsampleTooSmall(f"subsample size {m} < 2 (n={n}, fraction={plan.subsample_fraction})")
    ratio = None
    if plan.mode is StabSelMode.FIXED_LAM:
        ratio = theory_lambda_ratio(m, d) if plan.lam == "theory" else (
            float(plan.lam) if plan.rescaled else None)
    method_fixed = _method(formulation, Task.FIXED, ratio, config)
    method_path = _method(formulation, Task.STABSEL, None, config)

    def task(b):
        idx = subsample_indices(n, m, plan.seed, b)
        return _select(problem.subset(idx), formulation, plan, config, method_path, method_fixed)

    out = _map(task, range(plan.B), threads)
    sets = [o[0] for o in out]
    counts = np.zeros(d)
    for s in sets:
        counts[s] += 1.0
    freq = counts / plan.B
    selected = np.flatnonzero(freq >= plan.threshold)
    lam = None
    if plan.mode is StabSelMode.FIXED_LAM:
        lam = resolve_lambda(problem, formulation, plan.lam, plan.rescaled)[0]
    return StabSelResult(freq, plan.threshold, selected, [np.asarray(s) for s in sets],
                         plan.mode, lam=lam,
                         diagnostics=dict(wall_time=time.perf_counter() - t0, subsample_size=m,
                                          unconverged=int(sum(o[1] for o in out)),
                                          method=(method_fixed if plan.mode is StabSelMode.FIXED_LAM
                                                  else method_path).value))


def stability_profile(problem: ProblemData, formulation: Formulation,
                      plan: StabSelPlan = StabSelPlan(), config: SolverConfig = DEFAULT_CONFIG,
                      num: int = 40, threads: Optional[int] = None):
    """Selection frequency of every feature along a rescaled grid ``l``.

    Returns ``(ratios, freq, unconverged)`` with ``freq`` of shape
    ``(d, num)``; each subsample path is evaluated at ``l * lambda_max`` of
    that subsample, and ``unconverged`` counts grid solves that missed the
    tolerance.
    """
    validate(problem, formulation)
    n, d = problem.n, problem.d
    m = int(math.floor(plan.subsample_fraction * n))
    if m < 2:
        raise SubsampleTooSmall(f"subsample size {m} < 2")
    ratios = np.logspace(0.0, math.log10(plan.lambda_min_ratio), num)
    method = _method(formulation, Task.STABSEL, None, config)

    def task(b):
        sub = problem.subset(subsample_indices(n, m, plan.seed, b))
        lm = compute_lambda_max(sub, formulation)
        B, missed = _path_on_grid(sub, formulation, lm * ratios, method, config)
        return np.abs(B) > NONZERO_TOL, missed

    out = _map(task, range(plan.B), threads)
    return ratios, np.mean(np.stack([o[0] for o in out]), axis=0), int(sum(o[1] for o in out))
