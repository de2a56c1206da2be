import numpy as np
import pytest

from conlasso import Formulation, Kind, ProblemData


def make_instance(seed, n=30, d=20, k=1, sparsity=4, noise=0.5):
    """Gaussian design, zero-sum planted vector and ``k`` constraint rows."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    beta = np.zeros(d)
    idx = rng.choice(d, sparsity, replace=False)
    vals = rng.standard_normal(sparsity) + np.sign(rng.standard_normal(sparsity))
    vals -= vals.mean()
    beta[idx] = vals
    rows = [np.ones(d)] + [rng.standard_normal(d) for _ in range(k - 1)]
    C = np.array(rows[:k]).reshape(k, d)
    y = X @ beta + noise * rng.standard_normal(n)
    return ProblemData(X, y, C)


def make_classification(seed, n=40, d=10, k=1):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    w = np.zeros(d)
    w[:3] = (2.0, -1.0, -1.0)
    y = np.where(X @ w + 0.5 * rng.standard_normal(n) >= 0, 1.0, -1.0)
    return ProblemData(X, y, np.ones((k, d)) if k else None)


@pytest.fixture
def r1():
    return Formulation(Kind.R1)


@pytest.fixture
def inst():
    return make_instance(0)
