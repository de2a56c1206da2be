import numpy as np
import pytest

from conlasso import (BACKEND, Formulation, Kind, SolverConfig, compute_lambda_max,
                      douglas_rachford, oracle_solve, pfpds, ppds)
from conlasso import _backend, _pykernels

from conftest import make_classification, make_instance

compiled = pytest.mark.skipif(_backend.compiled_kernels is None,
                              reason="compiled extension not built")

CASES = [(douglas_rachford, Kind.R1), (douglas_rachford, Kind.R2), (douglas_rachford, Kind.R3),
         (douglas_rachford, Kind.R4), (ppds, Kind.R1), (ppds, Kind.R2), (pfpds, Kind.R1),
         (pfpds, Kind.R2)]


def test_backend_selection():
    assert BACKEND in ("compiled", "python")
    assert _backend.get("python") is _pykernels
    with pytest.raises(ValueError):
        _backend.get("fortran")


@compiled
@pytest.mark.parametrize("solver,kind", CASES)
def test_solver_parity(solver, kind):
    p = make_instance(21)
    f = Formulation(kind)
    lam = 0.3 * compute_lambda_max(p, f)
    a = solver(p, f, lam, SolverConfig(backend="python"))
    b = solver(p, f, lam, SolverConfig(backend="compiled"))
    assert a.diagnostics["iterations"] == b.diagnostics["iterations"]
    np.testing.assert_allclose(a.beta, b.beta, atol=1e-10)


@compiled
@pytest.mark.parametrize("kind", [Kind.R1, Kind.R4, Kind.C2])
def test_oracle_parity(kind):
    p = make_classification(22) if kind.classification else make_instance(22)
    f = Formulation(kind)
    lam = 0.3 * compute_lambda_max(p, f)
    a = oracle_solve(p, f, lam, budget=3000, polish=False, config=SolverConfig(backend="python"))
    b = oracle_solve(p, f, lam, budget=3000, polish=False,
                     config=SolverConfig(backend="compiled"))
    # golden-section sigma is resolved only to about sqrt(eps), and subgradient
    # steps amplify summation-order differences
    np.testing.assert_allclose(a.beta, b.beta, atol=1e-7)
    assert a.objective == pytest.approx(b.objective, rel=1e-8)


@compiled
@pytest.mark.parametrize("eta,gamma,unorm2", [(0.0, 0.5, 4.0), (-1.0, 2.0, 9.0), (3.0, 0.1, 0.0),
                                              (1e-3, 1e3, 1e-6)])
def test_cubic_root_parity(eta, gamma, unorm2):
    ck = _backend.compiled_kernels
    assert ck.cubic_root(eta, gamma, unorm2) == pytest.approx(
        _pykernels.cubic_root(eta, gamma, unorm2), rel=1e-13, abs=1e-15)
