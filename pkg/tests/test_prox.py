import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import minimize

from conlasso import (Formulation, Kind, ProblemData, factor_constraints, mean_shift_augment,
                      prox_perspective_sq, soft_threshold, spectral_norm_sq)

finite = st.floats(-20, 20, allow_nan=False)


def test_soft_threshold_examples():
    np.testing.assert_array_equal(soft_threshold([3, -1, 0.5], 1), [2, 0, 0])
    v = np.array([0.3, -2.0, 7.0])
    np.testing.assert_array_equal(soft_threshold(v, 0), v)
    np.testing.assert_array_equal(soft_threshold([-2.0], 5), [0.0])


@settings(max_examples=80, deadline=None)
@given(v=arrays(float, st.integers(1, 6), elements=finite), tau=st.floats(0, 10))
def test_soft_threshold_optimality(v, tau):
    p = soft_threshold(v, tau)
    # 0 in p - v + tau * sign(p)
    g = v - p
    on = p != 0
    np.testing.assert_allclose(g[on], tau * np.sign(p[on]), atol=1e-9)
    assert np.all(np.abs(g[~on]) <= tau + 1e-12)


@settings(max_examples=80, deadline=None)
@given(v=arrays(float, st.integers(1, 6), elements=finite), tau=st.floats(0.01, 10))
def test_moreau_identity(v, tau):
    # v = prox_{tau |.|_1}(v) + proj onto the inf-ball of radius tau
    np.testing.assert_allclose(soft_threshold(v, tau) + np.clip(v, -tau, tau), v, atol=1e-12)


def test_zero_sum_projection():
    F = factor_constraints(np.ones((1, 3)))
    np.testing.assert_allclose(F.project([1, 2, 3]), [-1, 0, 1], atol=1e-14)


def test_duplicated_row_same_projector():
    a = factor_constraints(np.ones((1, 4))).matrix()
    b = factor_constraints(np.ones((2, 4))).matrix()
    np.testing.assert_allclose(a, b, atol=1e-14)
    assert factor_constraints(np.ones((2, 4))).rank == 1


def test_empty_constraints():
    F = factor_constraints(np.zeros((0, 3)))
    assert F.rank == 0
    np.testing.assert_array_equal(F.project([1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_projector_vs_pseudoinverse(seed):
    rng = np.random.default_rng(seed)
    C = rng.standard_normal((2, 6))
    v = rng.standard_normal(6)
    F = factor_constraints(C)
    Pv = F.project(v)
    np.testing.assert_allclose(C @ Pv, 0, atol=1e-12)
    np.testing.assert_allclose(F.project(Pv), Pv, atol=1e-12)
    ref = v - np.linalg.pinv(C) @ (C @ v)
    np.testing.assert_allclose(Pv, ref, atol=1e-10)


def _persp_objective(x, eta, u, gamma):
    s, p = x[0], x[1:]
    return gamma * (p @ p) / s + 0.5 * ((s - eta) ** 2 + np.sum((p - u) ** 2))


def _persp_oracle(eta, u, gamma):
    """Numerical minimizer over s > 0, with the closed-domain point (0, 0) as a candidate."""
    u = np.asarray(u, float)
    best_x, best_f = np.zeros(u.size + 1), 0.5 * (eta ** 2 + u @ u)
    for s0 in (0.1, 1.0, 3.0):
        r = minimize(_persp_objective, np.r_[s0, u * 0.5], args=(eta, u, gamma),
                     method="L-BFGS-B", bounds=[(1e-12, None)] + [(None, None)] * u.size,
                     options=dict(ftol=1e-15, gtol=1e-12, maxiter=10000))
        if r.fun < best_f:
            best_x, best_f = r.x, r.fun
    return best_x, best_f


def test_perspective_zero_branch():
    s, p = prox_perspective_sq(-1.0, [1.0, 1.0], 1.0)
    assert s == 0.0 and np.all(p == 0)
    x, _ = _persp_oracle(-1.0, [1.0, 1.0], 1.0)
    assert x[0] < 1e-5 and np.all(np.abs(x[1:]) < 1e-4)


def test_perspective_fixed_point():
    s, p = prox_perspective_sq(1.0, [0.0], 1.0)
    assert s == pytest.approx(1.0, abs=1e-12)
    assert p[0] == 0.0


def test_perspective_cubic_example():
    s, p = prox_perspective_sq(0.0, [2.0, 0.0], 0.5)
    # bisection root of s (s + 1)^2 = 2, frozen
    assert s == pytest.approx(0.6956207695598622, abs=1e-10)
    np.testing.assert_allclose(p, [2 * s / (s + 1), 0.0], atol=1e-12)
    x, _ = _persp_oracle(0.0, [2.0, 0.0], 0.5)
    np.testing.assert_allclose(x, [s, p[0], p[1]], atol=1e-6)


@settings(max_examples=40, deadline=None)
@given(eta=st.floats(-5, 5), u=arrays(float, st.integers(1, 3), elements=st.floats(-5, 5)),
       gamma=st.floats(0.1, 3))
def test_perspective_variational(eta, u, gamma):
    s, p = prox_perspective_sq(eta, u, gamma)
    assert s >= 0
    val = 0.5 * ((s - eta) ** 2 + np.sum((p - u) ** 2)) + (gamma * (p @ p) / s if s > 0 else 0.0)
    _, best = _persp_oracle(eta, u, gamma)
    assert val <= best + 1e-7 * (1 + abs(best))


def test_mean_shift_augment_shapes():
    p = ProblemData(np.ones((3, 2)), [1.0, 2.0, 3.0], np.ones((1, 2)))
    aug = mean_shift_augment(p, Formulation(Kind.R2, rho=1.5), 0.5)
    assert aug.X_aug.shape == (3, 5)
    np.testing.assert_array_equal(aug.weights_aug[2:], 6.0)
    np.testing.assert_array_equal(aug.C_aug, [[1, 1, 0, 0, 0]])
    b, o = aug.map_back(np.arange(5.0))
    np.testing.assert_array_equal(b, [0, 1])
    np.testing.assert_array_equal(o, [2, 3, 4])
    with pytest.raises(ValueError):
        mean_shift_augment(p, Formulation(Kind.R1), 0.5)


def test_spectral_norm_examples():
    assert spectral_norm_sq(np.eye(3)) == pytest.approx(1.0, abs=1e-12)
    assert spectral_norm_sq(np.diag([3.0, 1.0])) == pytest.approx(9.0, abs=1e-10)
    X = np.random.default_rng(0).standard_normal((10, 7))
    assert spectral_norm_sq(X) == pytest.approx(np.linalg.svd(X, compute_uv=False)[0] ** 2,
                                                abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_power_iteration_monotone(seed):
    X = np.random.default_rng(seed).standard_normal((8, 5))
    val, hist = spectral_norm_sq(X, return_history=True)
    hist = np.asarray(hist)
    assert np.all(np.diff(hist) >= -1e-12 * hist[-1])
    assert val <= np.linalg.svd(X, compute_uv=False)[0] ** 2 * (1 + 1e-12)
