import json
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conlasso import (CVPlan, DatasetOptions, Formulation, Kind, ProblemData, StabSelPlan,
                      SyntheticSpec, compute_lambda_max, load_dataset, path_alg, random_data,
                      run_cv, run_fixed_lambda, run_stability_selection, save_results)
from conlasso import data as dio
from conlasso.selection import FixedLambdaPlan

from conftest import make_instance


def test_synthetic_shapes_and_zero_sum():
    X, C, y, beta = random_data(SyntheticSpec(100, 100, 5, 1, 0.5, True, 123))
    assert X.shape == (100, 100) and y.shape == (100,) and C.shape == (1, 100)
    assert np.flatnonzero(beta).size == 5
    assert abs(beta.sum()) < 1e-12
    np.testing.assert_array_equal(C, 1.0)


def test_synthetic_deterministic():
    a = random_data(SyntheticSpec(seed=4, k=3))
    b = random_data(SyntheticSpec(seed=4, k=3))
    for u, v in zip(a, b):
        np.testing.assert_array_equal(u, v)
    assert a[1].shape == (3, 100)


def test_synthetic_noiseless_path_recovers_support():
    X, C, y, beta = random_data(SyntheticSpec(n=100, d=40, sigma=0.0, seed=2))
    p = ProblemData(X, y, C)
    pth = path_alg(p, Formulation(Kind.R1), lam_min=1e-6 * compute_lambda_max(p))
    np.testing.assert_array_equal(np.flatnonzero(np.abs(pth.betas[:, -1]) > 1e-6),
                                  np.flatnonzero(beta))


def test_synthetic_rejects_single_zero_sum_nonzero():
    with pytest.raises(ValueError):
        SyntheticSpec(d_nonzero=1)


def _write(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def test_compositional_pipeline(tmp_path):
    f = tmp_path / "feat.csv"
    _write(f, "a,b,age,y\n1,3,40,2.5\n")
    ds = load_dataset(str(f), "y", DatasetOptions(compositional=("a", "b")))
    # hand computation: (1.5, 3.5) / 5 = (0.3, 0.7)
    np.testing.assert_allclose(ds.X[0], [np.log(0.3), np.log(0.7), 40.0], atol=1e-15)
    np.testing.assert_array_equal(ds.C, [[1, 1, 0]])
    assert ds.feature_names == ["a", "b", "age"] and ds.y[0] == 2.5


def test_no_compositional_mask_passes_through(tmp_path):
    f = tmp_path / "feat.csv"
    _write(f, "a,b,y\n1,3,2\n4,5,6\n")
    ds = load_dataset(str(f), "y")
    assert ds.C.shape == (0, 2)
    np.testing.assert_array_equal(ds.X, [[1, 3], [4, 5]])


def test_separate_response_file(tmp_path):
    _write(tmp_path / "f.csv", "a,b\n1,2\n3,4\n")
    _write(tmp_path / "r.csv", "bmi\n20\n30\n")
    ds = load_dataset(str(tmp_path / "f.csv"), "bmi", response_file=str(tmp_path / "r.csv"))
    np.testing.assert_array_equal(ds.y, [20, 30])
    _write(tmp_path / "r2.csv", "bmi\n20\n")
    with pytest.raises(dio.DataFormatError, match="1 responses for 2"):
        load_dataset(str(tmp_path / "f.csv"), "bmi", response_file=str(tmp_path / "r2.csv"))


def test_combo_shaped_file(tmp_path):
    rng = np.random.default_rng(0)
    taxa = [f"t{j}" for j in range(45)]
    counts = rng.poisson(3.0, (96, 45))
    cov = rng.standard_normal((96, 2))
    y = rng.standard_normal(96)
    dio.write_matrix(str(tmp_path / "c.csv"), np.hstack([counts, cov, y[:, None]]),
                     taxa + ["calories", "fat", "bmi"])
    ds = load_dataset(str(tmp_path / "c.csv"), "bmi", DatasetOptions(compositional=tuple(taxa)))
    assert (ds.n, ds.d) == (96, 47)
    np.testing.assert_array_equal(ds.C, [[1.0] * 45 + [0.0, 0.0]])


@pytest.mark.parametrize("text,match", [
    ("a,b,y\n1,x,2\n", "row 2, column 'b'"),
    ("a,b,y\n1,2\n", "row 2 has 2 fields"),
    ("a,a,y\n1,2,3\n", "duplicate"),
    ("", "empty"),
    ("a,b,y\n1,inf,2\n", "non-finite"),
])
def test_malformed_files(tmp_path, text, match):
    f = tmp_path / "bad.csv"
    _write(f, text)
    with pytest.raises(dio.DataFormatError, match=match):
        load_dataset(str(f), "y")


def test_missing_columns(tmp_path):
    f = tmp_path / "f.csv"
    _write(f, "a,b\n1,2\n")
    with pytest.raises(dio.DataFormatError, match="response"):
        load_dataset(str(f), "y")
    with pytest.raises(dio.DataFormatError, match="'z'"):
        load_dataset(str(f), "a", DatasetOptions(compositional=("z",)))


def test_zero_row_after_zero_pseudocount():
    with pytest.raises(dio.DataFormatError):
        dio.compositional_transform([[0, 0]], pseudocount=0.0)


def test_save_zero_solution(tmp_path):
    p = make_instance(0)
    f = Formulation(Kind.R1)
    sol = run_fixed_lambda(p, f, FixedLambdaPlan(1.0))
    summ = {k: None for k in dio.SUMMARY_KEYS}
    summ["objective"] = sol.objective
    save_results(sol, str(tmp_path), summ)
    beta, names = dio.read_beta(str(tmp_path))
    assert beta.size == p.d and np.all(beta == 0)
    assert json.load(open(tmp_path / "summary.json"))["objective"] == pytest.approx(p.y @ p.y)


def test_summary_requires_keys(tmp_path):
    with pytest.raises(ValueError, match="lacks keys"):
        dio.write_summary(str(tmp_path), {"task": "solve"})


@pytest.mark.parametrize("kind", [Kind.R1, Kind.R3])
def test_path_round_trip_bit_exact(tmp_path, kind):
    pth = path_alg(make_instance(1), Formulation(kind))
    save_results(pth, str(tmp_path))
    lams, betas, sig, names = dio.read_path(str(tmp_path))
    np.testing.assert_array_equal(lams, pth.lambdas)
    np.testing.assert_array_equal(betas, pth.betas)
    if kind is Kind.R3:
        np.testing.assert_array_equal(sig, pth.sigmas)
    else:
        assert sig is None


@settings(max_examples=40, deadline=None)
@given(M=arrays(float, (3, 4), elements=st.floats(allow_nan=False, allow_infinity=False,
                                                   width=64)))
def test_matrix_round_trip(tmp_path_factory, M):
    path = str(tmp_path_factory.mktemp("m") / "m.csv")
    dio.write_matrix(path, M)
    np.testing.assert_array_equal(dio.read_matrix(path), M)


def test_stabsel_file_selected_column(tmp_path):
    res = run_stability_selection(make_instance(2), Formulation(Kind.R1), StabSelPlan(B=10))
    save_results(res, str(tmp_path))
    freq, sel, _ = dio.read_stabsel(str(tmp_path))
    np.testing.assert_array_equal(freq, res.frequencies)
    np.testing.assert_array_equal(sel, np.flatnonzero(res.frequencies >= 0.7))


def test_cv_result_files(tmp_path):
    res = run_cv(make_instance(3), Formulation(Kind.R1), CVPlan(grid_size=10))
    files = save_results(res, str(tmp_path))
    assert {os.path.basename(f) for f in files} == {"cv.csv", "beta.csv"}
    lams, mean, se = dio.read_cv(str(tmp_path))
    np.testing.assert_array_equal(lams, res.lambdas)
    np.testing.assert_array_equal(se, res.std_error)


def test_unwritable_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        save_results(run_fixed_lambda(make_instance(0), Formulation(Kind.R1)),
                     str(blocker / "sub"))
