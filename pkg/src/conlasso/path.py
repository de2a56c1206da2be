"""Homotopy (Path-Alg) solver for the piecewise-affine solution path.

All path-capable kinds share one engine: each sample contributes a
piecewise-quadratic loss in ``u_i = a_i^T b`` (``a_i = x_i`` for regression,
``y_i x_i`` for classification) whose pieces have gradient
``2 q (u - target) + slope`` with ``q`` in {0, 1}. On a fixed active set,
sign pattern and piece assignment the equality-constrained stationarity
system is linear with a right-hand side affine in ``lam``, so the solution
moves along a line until one of three events fires:

* an active coefficient reaches zero,
* an inactive feature's dual correlation reaches ``lam * w_j``,
* a sample's ``u_i`` crosses a knee of its loss (Huber at ``y_i +- rho``,
  hinge knees at ``rho_class`` and ``1``).

A Huber sample in a linear piece is exactly a sample with a nonzero
mean-shift coordinate, so R2 is solved without forming ``[X | I]``. R3 is
read off the R1 path: at fixed scale the R3 problem is R1 at
``lam' = lam * sigma``, hence every R1 point ``lam'`` maps to the R3 level
``lam' / sigma(lam')``.
"""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.optimize import brentq

from . import _backend
from .errors import DegeneratePath, MaxBreakpointsExceeded
from .problem import (SIGMA_FLOOR, Formulation, Kind, ProblemData, Solution,
                      concomitant_sigma, objective_value, validate)
from .prox import factor_constraints
from .solvers import (DEFAULT_CONFIG, Method, SolverConfig, check_compatible,
                      compute_lambda_max, feasibility, minimax_shift, zero_gradient)

TIE_TOL = 1e-12
START_TOL = 1e-9
SINGULAR_RCOND = 1e-12
RESTART_GAPS = (1e-2, 1e-3, 1e-4)
RESTART_TOP = 1e-10
KKT_TOL = 1e-9
RATE_TOL = 1e-12


@dataclass(frozen=True)
class PathResult:
    """Breakpoints of the solution path, ordered by decreasing ``lam``.

    ``betas[:, i]`` is the solution at ``lambdas[i]``. For R3 the path is
    affine in ``inner_lambdas`` (the equivalent R1 level) rather than in
    ``lambdas``; :meth:`solution_at` handles both cases.
    """

    lambdas: np.ndarray
    betas: np.ndarray
    kind: Kind
    lambda_max: float
    sigmas: Optional[np.ndarray] = None
    inner_lambdas: Optional[np.ndarray] = None
    events: list = field(default_factory=list)
    method: str = "PathAlg"
    diagnostics: dict = field(default_factory=dict)
    y: Optional[np.ndarray] = None
    X: Optional[np.ndarray] = None

    def __len__(self):
        return self.lambdas.size

    def solution_at(self, lam: float):
        """``(beta, sigma)`` at any ``lam`` in ``[lambdas[-1], lambdas[0]]``.

        Values above ``lambdas[0]`` return the first point; below the last
        breakpoint the last point is returned.
        """
        lams = self.lambdas
        if lam >= lams[0]:
            return self.betas[:, 0].copy(), _first(self.sigmas, 0)
        if lam <= lams[-1]:
            return self.betas[:, -1].copy(), _first(self.sigmas, -1)
        i = int(np.searchsorted(-lams, -lam, side="right")) - 1
        i = min(max(i, 0), lams.size - 2)
        if self.inner_lambdas is None or self.method != "PathAlg":
            t = (lams[i] - lam) / (lams[i] - lams[i + 1])
            b = self.betas[:, i] + t * (self.betas[:, i + 1] - self.betas[:, i])
            s = None
            if self.sigmas is not None:
                s = self.sigmas[i] + t * (self.sigmas[i + 1] - self.sigmas[i])
            return b, s
        return _r3_point(self.X, self.y, self.inner_lambdas[i], self.inner_lambdas[i + 1],
                         self.betas[:, i], self.betas[:, i + 1], lam)

    def beta_at(self, lam: float) -> np.ndarray:
        return self.solution_at(lam)[0]

    def entry_order(self, tol: float = 1e-12) -> list:
        """Features in order of first entering the path.

        Uses the event log when present; otherwise features are ordered by
        the first column where they are nonzero, ties broken by larger
        magnitude and then lower index.
        """
        order, seen = [], set()
        if self.events:
            for _, kind, j in self.events:
                if kind.startswith("enter") and j not in seen:
                    seen.add(j)
                    order.append(int(j))
            return order
        for i in range(self.lambdas.size):
            col = np.abs(self.betas[:, i])
            nz = [j for j in np.flatnonzero(col > tol) if j not in seen]
            for j in sorted(nz, key=lambda j: (-col[j], j)):
                seen.add(j)
                order.append(int(j))
        return order


def _first(arr, i):
    return None if arr is None else float(arr[i])


# --- piecewise-quadratic loss description ---------------------------------

@dataclass
class _Pieces:
    knots: np.ndarray   # (n, K) increasing per row
    q: np.ndarray       # (n, K + 1) curvature flag per piece
    target: np.ndarray  # (n, K + 1)
    slope: np.ndarray   # (n, K + 1)


def _pieces(problem: ProblemData, formulation: Formulation, y=None):
    kind = formulation.kind
    y = problem.y if y is None else y
    n = y.size
    one = np.ones((n, 1))
    if kind in (Kind.R1, Kind.R3):
        return _Pieces(np.zeros((n, 0)), one.copy(), y[:, None].copy(), np.zeros((n, 1)))
    if kind is Kind.R2:
        rho = formulation.rho
        knots = np.column_stack([y - rho, y + rho])
        q = np.tile([0.0, 1.0, 0.0], (n, 1))
        target = np.column_stack([y, y, y])
        slope = np.tile([-2.0 * rho, 0.0, 2.0 * rho], (n, 1))
        return _Pieces(knots, q, target, slope)
    if kind is Kind.C1:
        return _Pieces(np.ones((n, 1)), np.tile([1.0, 0.0], (n, 1)),
                       np.ones((n, 2)), np.zeros((n, 2)))
    if kind is Kind.C2:
        rc = formulation.rho_class
        knots = np.tile([rc, 1.0], (n, 1))
        q = np.tile([0.0, 1.0, 0.0], (n, 1))
        slope = np.tile([-2.0 * (1.0 - rc), 0.0, 0.0], (n, 1))
        return _Pieces(knots, q, np.ones((n, 3)), slope)
    raise ValueError(f"no path engine for {kind.value}")


def _design(problem: ProblemData, formulation: Formulation):
    if formulation.kind.classification:
        return problem.y[:, None] * problem.X
    return problem.X


# --- homotopy engine ----------------------------------------------------------

@dataclass
class _Segment:
    lam_hi: float
    lam_lo: float
    beta_hi: np.ndarray
    beta_lo: np.ndarray
    events: list


class _Homotopy:
    """Event-driven continuation from ``lam_max`` downwards."""

    def __init__(self, A, pieces, Qc, w, v0, lam_max, mu0, numeric=None):
        self.A = A
        self.numeric = numeric
        self.restarts = 0
        self.P = pieces
        self.Qc = Qc
        self.w = w
        n, d = A.shape
        self.n, self.d = n, d
        self.lam = lam_max
        self.beta = np.zeros(d)
        self.signs = np.zeros(d)
        u = np.zeros(n)
        self.region = np.sum(pieces.knots < u[:, None], axis=1)
        self.mu_hold = mu0.copy()
        corr = v0 - Qc.T @ mu0
        tight = np.abs(corr) >= lam_max * w * (1.0 - START_TOL)
        if lam_max <= 0:
            tight[:] = False
        self.E = sorted(np.flatnonzero(tight).tolist())
        self.signs[self.E] = np.sign(corr[self.E])
        self.singular = False

    # piece parameters of every sample under the current assignment
    def _piece_params(self):
        idx = (np.arange(self.n), self.region)
        return self.P.q[idx], self.P.target[idx], self.P.slope[idx]

    def _solve(self):
        """Affine solution ``beta_E = b0 - lam b1``, ``mu = mu0 - lam mu1``."""
        E = self.E
        A, Qc, w = self.A, self.Qc, self.w
        q, t, c = self._piece_params()
        AE = A[:, E]
        AqE = AE * q[:, None]
        H = 2.0 * AqE.T @ AE
        rhs0 = 2.0 * AqE.T @ t - AE.T @ c
        rhs1 = w[E] * self.signs[E]
        r = Qc.shape[0]
        if r and len(E):
            U, sv, _ = np.linalg.svd(Qc[:, E], full_matrices=True)
            rk = int(np.sum(sv > 1e-10 * max(sv[0], 1e-300))) if sv.size else 0
        else:
            U, rk = np.eye(r), 0
        R, Z = U[:, :rk], U[:, rk:]
        D = R.T @ Qc[:, E]
        m = len(E)
        K = np.zeros((m + rk, m + rk))
        K[:m, :m] = H
        K[:m, m:] = D.T
        K[m:, :m] = D
        zfix = Z.T @ self.mu_hold
        hold = Z @ zfix
        B = np.zeros((m + rk, 2))
        B[:m, 0] = rhs0 - Qc[:, E].T @ hold
        B[:m, 1] = rhs1
        if m + rk:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                lu = scipy.linalg.lu_factor(K, check_finite=False)
            diag = np.abs(np.diag(lu[0]))
            if diag.min() <= SINGULAR_RCOND * max(diag.max(), 1e-300):
                return None
            sol = scipy.linalg.lu_solve(lu, B, check_finite=False)
        else:
            sol = B
        b0 = np.zeros(self.d)
        b1 = np.zeros(self.d)
        b0[E] = sol[:m, 0]
        b1[E] = sol[:m, 1]
        mu0 = R @ sol[m:, 0] + hold
        mu1 = R @ sol[m:, 1]
        return b0, b1, mu0, mu1, q, t, c

    def _duals(self, b0, b1, mu0, mu1, q, t, c):
        A, Qc = self.A, self.Qc
        u0, u1 = A @ b0, A @ b1
        g0 = 2.0 * q * (u0 - t) + c
        g1 = 2.0 * q * u1
        a = -(A.T @ g0 + Qc.T @ mu0)
        b = -(A.T @ g1 + Qc.T @ mu1)
        return a, b, u0, u1

    def step(self, lam_stop, single=False):
        """Advance to the next event or ``lam_stop``; returns a segment or None."""
        solved = self._solve()
        if solved is None:
            seg = self._restart()
            if seg is None:
                self.singular = True
            return seg
        b0, b1, mu0, mu1, q, t, c = solved
        lam = self.lam
        a, bd, u0, u1 = self._duals(b0, b1, mu0, mu1, q, t, c)
        beta_cur = b0 - lam * b1
        u_cur = u0 - lam * u1
        corr = a - lam * bd
        # rates as lam decreases by Delta: beta += Delta b1, corr += Delta bd, u += Delta u1
        cand = []  # (Delta, order, index, kind)
        Eset = set(self.E)
        # rates at rounding level are zero; acting on them makes a feature leave and re-enter forever
        floor = RATE_TOL * max(float(np.max(np.abs(b1))) if self.E else 0.0, 1e-300)
        for j in self.E:
            rate = self.signs[j] * b1[j]
            if rate < -floor:
                cand.append((max(self.signs[j] * beta_cur[j], 0.0) / -rate, 0, j, "leave"))
        inact = np.array([j for j in range(self.d) if j not in Eset], dtype=int)
        if inact.size:
            wj = self.w[inact]
            up = wj + bd[inact]
            dn = wj - bd[inact]
            hp = lam * wj - corr[inact]
            hm = lam * wj + corr[inact]
            for jj, j in enumerate(inact):
                if up[jj] > 0:
                    cand.append((max(hp[jj], 0.0) / up[jj], 2, int(j), "enter+"))
                if dn[jj] > 0:
                    cand.append((max(hm[jj], 0.0) / dn[jj], 2, int(j), "enter-"))
        K = self.P.knots.shape[1]
        if K:
            reg = self.region
            for i in np.flatnonzero(u1 != 0):
                k = reg[i]
                if u1[i] > 0 and k < K:
                    cand.append((max(self.P.knots[i, k] - u_cur[i], 0.0) / u1[i], 1, int(i), "knee+"))
                elif u1[i] < 0 and k > 0:
                    cand.append((max(u_cur[i] - self.P.knots[i, k - 1], 0.0) / -u1[i], 1, int(i), "knee-"))
        d_stop = lam - lam_stop
        if not cand:
            delta = d_stop
            hits = []
        else:
            cand.sort(key=lambda e: (e[0], e[1], e[2]))
            delta = min(cand[0][0], d_stop)
            tie = delta + TIE_TOL * max(lam, 1e-300)
            hits = [e for e in cand if e[0] <= tie] if cand[0][0] <= d_stop else []
            if single and hits:
                hits = hits[:1]
        new_lam = lam - delta
        if not hits:
            new_lam = lam_stop
        beta_new = b0 - new_lam * b1
        beta_new[[j for j in range(self.d) if j not in Eset]] = 0.0
        seg = _Segment(lam, new_lam, beta_cur, beta_new.copy(), [])
        self.lam = new_lam
        corr_new = a - new_lam * bd
        self.mu_hold = mu0 - new_lam * mu1
        for dlt, _, idx, kind in hits:
            if kind == "leave":
                self.E.remove(idx)
                beta_new[idx] = 0.0
                self.signs[idx] = 0.0
            elif kind.startswith("knee"):
                self.region[idx] += 1 if kind == "knee+" else -1
            else:
                if idx not in self.E:
                    self.E.append(idx)
                    self.signs[idx] = 1.0 if kind == "enter+" else -1.0
            seg.events.append((float(new_lam), kind, int(idx)))
        self.E.sort()
        tiny = RATE_TOL * max(float(np.max(np.abs(beta_new))), 1e-300)
        for j in self.E:
            if abs(beta_new[j]) > tiny:
                self.signs[j] = np.sign(beta_new[j])
            else:
                beta_new[j] = 0.0
        self.beta = beta_new
        seg.beta_lo = beta_new.copy()
        del corr_new
        return seg


    def _certified(self, solved, lam):
        """KKT check of an affine piece at ``lam``, including piece membership."""
        b0, b1, mu0, mu1, q, t, c = solved
        a, bd, u0, u1 = self._duals(b0, b1, mu0, mu1, q, t, c)
        E = self.E
        beta = b0 - lam * b1
        scale = max(1.0, float(np.max(np.abs(beta)))) if beta.size else 1.0
        if np.any(self.signs[E] * beta[E] < -KKT_TOL * scale):
            return False
        u = u0 - lam * u1
        K = self.P.knots.shape[1]
        if K:
            idx = np.arange(self.n)
            pad = np.column_stack([np.full(self.n, -np.inf), self.P.knots, np.full(self.n, np.inf)])
            tol = KKT_TOL * np.maximum(1.0, np.abs(u))
            if np.any(u < pad[idx, self.region] - tol) or np.any(u > pad[idx, self.region + 1] + tol):
                return False
        inact = np.setdiff1d(np.arange(self.d), E)
        corr = a - lam * bd
        return bool(np.all(np.abs(corr[inact]) <= lam * self.w[inact] * (1.0 + KKT_TOL) + KKT_TOL))

    def _restart(self):
        """Re-identify the active system just below a singular point.

        With zero curvature on the active set (every sample in a linear
        piece, as at ``lam_max`` for C2 with ``rho_class >= 0``), the path
        jumps. The sets are read off a numerical solve at ``lam (1 - gap)``,
        the affine piece on them is solved exactly, and it is accepted only
        if it passes KKT at both ``lam (1 - gap)`` and ``lam (1 - 1e-10)``;
        KKT is affine in ``lam`` on a fixed piece, so it then holds between.
        """
        if self.numeric is None:
            return None
        lam = self.lam
        saved = (list(self.E), self.signs.copy(), self.region.copy(), self.mu_hold.copy())
        for gap in RESTART_GAPS:
            lam1 = lam * (1.0 - gap)
            if lam1 <= 0:
                break
            b = self.numeric(lam1, self.beta)
            if b is None:
                continue
            cut = 1e-8 * max(float(np.max(np.abs(b))), 1e-300) if b.size else 0.0
            self.E = np.flatnonzero(np.abs(b) > cut).tolist()
            self.signs = np.where(np.abs(b) > cut, np.sign(b), 0.0)
            self.region = np.sum(self.P.knots < (self.A @ b)[:, None], axis=1)
            solved = self._solve()
            top = lam * (1.0 - RESTART_TOP)
            if solved is not None and self._certified(solved, lam1) and self._certified(solved, top):
                b0, b1, mu0, mu1 = solved[:4]
                beta = b0 - top * b1
                events = [(float(top), "restart", -1)]
                events += [(float(top), "enter+" if self.signs[j] > 0 else "enter-", int(j))
                           for j in self.E if j not in saved[0]]
                seg = _Segment(lam, top, self.beta.copy(), beta.copy(), events)
                self.beta = beta
                self.lam = top
                self.mu_hold = mu0 - top * mu1
                self.restarts += 1
                return seg
            self.E, self.signs, self.region, self.mu_hold = (list(saved[0]), saved[1].copy(),
                                                             saved[2].copy(), saved[3].copy())
        return None


def _numeric(A, target, Qc, w, code, rho, lip):
    """Tight projected-splitting solve used to seed restarts."""
    kern = _backend.get()
    tau = 0.9 / lip if lip > 0 else 1.0
    A = np.ascontiguousarray(A)
    target = np.ascontiguousarray(target)
    Q = np.ascontiguousarray(Qc)

    def run(lam, start):
        xh, _, _, res = kern.ppds_run(A, target, Q, np.ascontiguousarray(lam * w), code, float(rho),
                                      float(tau), np.array(start, dtype=float), 200000, 1e-13)
        xh = np.asarray(xh)
        if not res <= 1e-11 * max(1.0, float(np.max(np.abs(xh)))):
            return None
        return xh - Qc.T @ (Qc @ xh) if Qc.shape[0] else xh
    return run


def _segments(engine, lam_stop, cap, on_segment):
    """Drive the engine; ``on_segment`` returns True to stop early."""
    n_zero = 0
    count = 0
    while engine.lam > lam_stop:
        seg = engine.step(lam_stop, single=n_zero > 2)
        if seg is None:
            break
        count += 1
        if seg.lam_hi - seg.lam_lo <= TIE_TOL * max(seg.lam_hi, 1e-300):
            n_zero += 1
            if n_zero > 4 * (engine.d + engine.n):
                raise DegeneratePath(f"cycling detected at lam={engine.lam:.6g}")
        else:
            n_zero = 0
        if on_segment(seg):
            return count, False
        if count > cap:
            return count, True
    return count, False


def _setup(problem, formulation):
    kind = formulation.kind
    base = Formulation(Kind.R1) if kind is Kind.R3 else formulation
    A = _design(problem, base)
    fac = factor_constraints(problem.C, d=problem.d)
    Qc = fac.Q
    v0 = zero_gradient(problem, base)
    lam_max, mu = minimax_shift(v0, Qc, problem.weights)
    code = {Kind.R1: 0, Kind.R2: 1, Kind.C1: 2, Kind.C2: 3}[base.kind]
    target = np.zeros(problem.n) if base.kind.classification else problem.y
    rho = base.rho_class if base.kind is Kind.C2 else base.rho
    lip = 2.0 * float(np.linalg.norm(A, 2)) ** 2
    engine = _Homotopy(A, _pieces(problem, base), Qc, problem.weights, v0, lam_max, mu,
                       numeric=_numeric(A, target, Qc, problem.weights, code, rho, lip))
    return engine, lam_max


def _r3_point(X, y, lh, ll, bh, bl, lam):
    """R3 solution at ``lam`` inside the R1 segment ``[ll, lh]``."""
    n = y.size
    rh = X @ bh - y
    rl = X @ bl - y

    def gap(tau):
        lp = lh + tau * (ll - lh)
        r = rh + tau * (rl - rh)
        return lp - lam * np.sqrt(2.0 / n) * np.linalg.norm(r)

    ga, gb = gap(0.0), gap(1.0)
    if ga <= 0:
        tau = 0.0
    elif gb >= 0:
        tau = 1.0
    else:
        tau = brentq(gap, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    b = bh + tau * (bl - bh)
    s = concomitant_sigma(X @ b - y, n)
    return b, max(s, SIGMA_FLOOR)


def path_alg(problem: ProblemData, formulation: Formulation,
             config: SolverConfig = DEFAULT_CONFIG, lam_min: float | None = None,
             stop_after_entries: int | None = None) -> PathResult:
    """Solution path from ``lam_max`` down to ``lam_min``
    (default ``config.path_lambda_min_ratio * lam_max``).

    Stops early (flagged in ``diagnostics['stopped']``) if the active system
    turns singular, or once ``stop_after_entries`` distinct features have
    been nonzero. For R3, ``lambdas`` are on the R3 scale.
    """
    kind = formulation.kind
    check_compatible(kind, Method.PATH_ALG)
    validate(problem, formulation)
    t0 = time.perf_counter()
    engine, lam_max_inner = _setup(problem, formulation)
    cap = config.max_breakpoints or 50 * problem.d
    X, y = problem.X, problem.y

    lams, betas = [lam_max_inner], [np.zeros(problem.d)]
    # features tight at lam_max join the active set before the first step
    events = [(float(lam_max_inner), "enter+" if engine.signs[j] > 0 else "enter-", int(j))
              for j in engine.E]
    entered = {j for _, _, j in events}

    def enough(seg):
        if stop_after_entries is None:
            return False
        entered.update(j for _, kind, j in seg.events if kind.startswith("enter"))
        return len(entered) >= stop_after_entries
    if kind is Kind.R3:
        s0 = concomitant_sigma(y, problem.n)
        lam_max = lam_max_inner / s0 if s0 > 0 else 0.0
        target = lam_min if lam_min is not None else config.path_lambda_min_ratio * lam_max
        sig = [s0]
        outer = [lam_max]

        def on_seg(seg):
            events.extend(seg.events)
            s_lo = concomitant_sigma(X @ seg.beta_lo - y, problem.n)
            lam_lo = seg.lam_lo / s_lo if s_lo > 0 else np.inf
            if lam_lo <= target or seg.lam_lo <= 0:
                b, s = _r3_point(X, y, seg.lam_hi, seg.lam_lo, seg.beta_hi, seg.beta_lo, target)
                lams.append(float(target * s))
                betas.append(b)
                sig.append(s)
                outer.append(target)
                return True
            lams.append(seg.lam_lo)
            betas.append(seg.beta_lo)
            sig.append(s_lo)
            outer.append(lam_lo)
            return enough(seg)

        _, capped = _segments(engine, 0.0, cap, on_seg)
        res = PathResult(np.array(outer), np.column_stack(betas), kind, lam_max,
                         sigmas=np.array(sig), inner_lambdas=np.array(lams), events=events,
                         diagnostics=dict(stopped=engine.singular, restarts=engine.restarts,
                                          wall_time=time.perf_counter() - t0), y=y, X=X)
    else:
        lam_max = compute_lambda_max(problem, formulation)
        target = lam_min if lam_min is not None else config.path_lambda_min_ratio * lam_max

        def on_seg(seg):
            events.extend(seg.events)
            lams.append(seg.lam_lo)
            betas.append(seg.beta_lo)
            return enough(seg)

        _, capped = _segments(engine, target, cap, on_seg)
        res = PathResult(np.array(lams), np.column_stack(betas), kind, lam_max,
                         events=events, diagnostics=dict(stopped=engine.singular,
                                                         restarts=engine.restarts, wall_time=time.perf_counter() - t0))
    ref = res.lambda_max
    if kind is not Kind.R3 and ref > res.lambdas[0] * (1.0 + 1e-12):
        # zero segment between the rescaling reference and the zero threshold
        res = PathResult(np.concatenate([[ref], res.lambdas]),
                         np.column_stack([np.zeros(problem.d), res.betas]), kind, ref,
                         events=res.events, diagnostics=dict(res.diagnostics, zero_threshold=res.lambdas[0]))
    res = _dedupe(res)
    if capped:
        raise MaxBreakpointsExceeded(res, cap)
    return res


def _dedupe(res: PathResult) -> PathResult:
    """Drop zero-length steps so that ``lambdas`` is strictly decreasing."""
    lams = res.lambdas
    keep = [0]
    for i in range(1, lams.size):
        if lams[i] < lams[keep[-1]]:
            keep.append(i)
        else:
            keep[-1] = i if i == lams.size - 1 and lams[i] == lams[keep[-1]] else keep[-1]
    keep = np.array(sorted(set(keep)))
    if keep.size == lams.size:
        return res
    pick = lambda a: None if a is None else a[..., keep]
    return PathResult(lams[keep], res.betas[:, keep], res.kind, res.lambda_max,
                      sigmas=pick(res.sigmas), inner_lambdas=pick(res.inner_lambdas),
                      events=res.events, method=res.method, diagnostics=res.diagnostics,
                      y=res.y, X=res.X)


def path_solve(problem: ProblemData, formulation: Formulation, lam: float,
               config: SolverConfig = DEFAULT_CONFIG) -> Solution:
    """Solution at a single ``lam`` by following the path down to it."""
    t0 = time.perf_counter()
    kind = formulation.kind
    path = path_alg(problem, formulation, config, lam_min=lam)
    beta, sigma = path.solution_at(lam)
    beta = np.where(np.abs(beta) > 0, beta, 0.0)
    reached = path.lambdas[-1] <= lam * (1 + 1e-12) or lam >= path.lambdas[0]
    diag = dict(solver="PathAlg", iterations=len(path), breakpoints=len(path),
                residual=0.0, converged=bool(reached), wall_time=time.perf_counter() - t0,
                feasibility=feasibility(problem, beta), stopped=path.diagnostics.get("stopped"))
    if not kind.concomitant:
        sigma = None
    obj = objective_value(problem, formulation, beta, sigma, lam)
    return Solution(beta=beta, objective=obj, sigma=sigma, lam=lam, diagnostics=diag)
