import numpy as np
import pytest

from conlasso import (Formulation, IncompatibleMethodError, Kind, MaxBreakpointsExceeded, ProblemData, SolverConfig,
                      compute_lambda_max, kkt_residual, mean_shift_augment, oracle_solve, path_alg,
                      path_solve)
from conlasso.problem import concomitant_sigma, objective_value

from conftest import make_classification, make_instance


def _check_path_kkt(p, f, pth, tol=1e-5):
    lams = pth.lambdas
    points = list(lams) + [0.5 * (a + b) for a, b in zip(lams[:-1], lams[1:])]
    worst = 0.0
    for lam in points:
        b, s = pth.solution_at(float(lam))
        worst = max(worst, kkt_residual(p, f, b, float(lam), s)[0] / lam)
    assert worst <= tol
    return worst


def test_orthogonal_breakpoints():
    p = ProblemData(np.eye(3), [3.0, 1.0, 0.0])
    pth = path_alg(p, Formulation(Kind.R1), lam_min=1.0)
    np.testing.assert_allclose(pth.lambdas[:2], [6.0, 2.0], atol=1e-12)
    np.testing.assert_allclose(pth.beta_at(2.0), [2.0, 0.0, 0.0], atol=1e-12)
    # closed form sign(y) max(|y| - lam / 2, 0) in between
    np.testing.assert_allclose(pth.beta_at(1.5), [2.25, 0.25, 0.0], atol=1e-12)
    assert pth.entry_order() == [0, 1]


@pytest.mark.parametrize("kind", [Kind.R1, Kind.R2, Kind.R3, Kind.C1, Kind.C2])
def test_first_point_and_kkt(kind):
    p = make_classification(2) if kind.classification else make_instance(2)
    f = Formulation(kind)
    pth = path_alg(p, f)
    assert pth.lambdas[0] == pytest.approx(compute_lambda_max(p, f))
    assert np.all(pth.betas[:, 0] == 0)
    assert np.all(np.diff(pth.lambdas) < 0)
    _check_path_kkt(p, f, pth)


def test_breakpoints_match_oracle():
    p = make_instance(3, n=20, d=10)
    f = Formulation(Kind.R1)
    pth = path_alg(p, f)
    for lam in pth.lambdas[1:6]:
        ref = oracle_solve(p, f, float(lam))
        b = pth.beta_at(float(lam))
        assert objective_value(p, f, b, lam=lam) == pytest.approx(ref.objective, rel=1e-5)


def test_active_count_nondecreasing_near_start():
    p = make_instance(4, n=60, d=30)
    pth = path_alg(p, Formulation(Kind.R1))
    counts = [(np.abs(pth.betas[:, i]) > 0).sum() for i in range(min(5, len(pth)))]
    assert counts == sorted(counts)
    assert all(kind.startswith(("enter", "leave", "knee")) for _, kind, _ in pth.events)


def test_r3_sigma_along_path():
    p = make_instance(5)
    pth = path_alg(p, Formulation(Kind.R3))
    for i in range(len(pth)):
        r = p.X @ pth.betas[:, i] - p.y
        assert pth.sigmas[i] == pytest.approx(concomitant_sigma(r, p.n), abs=1e-9)


def test_path_solve_equals_interpolation():
    p = make_instance(6)
    f = Formulation(Kind.R2)
    lam = 0.3 * compute_lambda_max(p, f)
    sol = path_solve(p, f, lam)
    assert sol.diagnostics["converged"]
    assert kkt_residual(p, f, sol.beta, lam)[0] <= 1e-8 * lam


def test_stop_after_entries():
    p = make_instance(7, n=50, d=40)
    pth = path_alg(p, Formulation(Kind.R1), stop_after_entries=3)
    assert len(set(pth.entry_order())) >= 3
    full = path_alg(p, Formulation(Kind.R1))
    assert len(pth) < len(full)
    assert pth.entry_order()[:3] == full.entry_order()[:3]


def test_breakpoint_cap():
    p = make_instance(8)
    with pytest.raises(MaxBreakpointsExceeded) as exc:
        path_alg(p, Formulation(Kind.R1), SolverConfig(max_breakpoints=2))
    assert len(exc.value.path) <= 4


def test_path_rejects_r4():
    with pytest.raises(IncompatibleMethodError):
        path_alg(make_instance(0), Formulation(Kind.R4))


def test_huber_reference_level_prepends_zero_segment():
    from conlasso.solvers import zero_threshold
    p = make_instance(9)
    f = Formulation(Kind.R2, rho=0.5)
    pth = path_alg(p, f)
    lam0 = zero_threshold(p, f)
    assert pth.lambda_max > 2 * lam0
    assert pth.lambdas[1] == pytest.approx(lam0)
    assert np.all(pth.betas[:, 1] == 0)


def test_c2_with_nonnegative_knee_restarts_past_jump():
    # at beta = 0 every margin sits on the linear piece, so the path jumps at lam_max
    p = make_classification(5)
    f = Formulation(Kind.C2, rho_class=0.3)
    pth = path_alg(p, f)
    assert not pth.diagnostics["stopped"]
    assert pth.diagnostics["restarts"] >= 1
    assert pth.lambdas[-1] == pytest.approx(SolverConfig().path_lambda_min_ratio * pth.lambda_max)
    assert len(pth.entry_order()) >= 2
    _check_path_kkt(p, f, pth)


@pytest.mark.parametrize("seed", [200, 202])
def test_mean_shift_augmented_path_matches_direct(seed):
    # [X | I] design: a coefficient pinned at zero inside the active set must keep its sign
    p = make_instance(seed)
    f = Formulation(Kind.R2, rho=1.1)
    lam = 0.2 * compute_lambda_max(p, f)
    direct = path_solve(p, f, lam)
    ap = mean_shift_augment(p, f, lam).as_problem(p.y)
    pth = path_alg(ap, Formulation(Kind.R1), lam_min=lam)
    _check_path_kkt(ap, Formulation(Kind.R1), pth, tol=1e-8)
    assert path_solve(ap, Formulation(Kind.R1), lam).objective == pytest.approx(direct.objective, rel=1e-10)
