import csv
import json
import os

import numpy as np
import pytest

from conlasso import cli
from conlasso import data as dio


@pytest.fixture(scope="module")
def ds(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds")
    code = cli.main(["synth", "--n", "100", "--d", "100", "--nonzero", "5", "--k", "1",
                     "--sigma", "0.5", "--zerosum", "--seed", "123", "--out", str(out)])
    assert code == 0
    return out


def _data(ds):
    return ["--x", str(ds / "X.csv"), "--y", str(ds / "y.csv"), "--c", str(ds / "C.csv")]


def _truth(ds):
    return json.load(open(ds / "truth.json"))["support"]


def test_synth_files(ds, tmp_path):
    assert sorted(os.listdir(ds)) == ["C.csv", "X.csv", "truth.json", "y.csv"]
    assert len(_truth(ds)) == 5
    cli.main(["synth", "--zerosum", "--seed", "123", "--out", str(tmp_path)])
    for name in ("X.csv", "y.csv", "C.csv", "truth.json"):
        assert (tmp_path / name).read_bytes() == (ds / name).read_bytes()


def test_solve_reports_planted_support(ds, tmp_path, capsys):
    out = tmp_path / "r"
    code = cli.main(["solve", "--formulation", "R2", "--rho", "1.5", "--lam", "0.1",
                     "--rescaled", "--out", str(out)] + _data(ds))
    assert code == 0
    text = capsys.readouterr().out
    assert "LAMBDA FIXED" in text and "Selected variables" in text
    summ = dio.read_summary(str(out))
    assert summ["selected"] == _truth(ds)
    assert set(dio.SUMMARY_KEYS) <= set(summ)


def test_stabsel_first_q(ds, tmp_path, capsys):
    out = tmp_path / "s"
    code = cli.main(["stabsel", "--formulation", "R2", "--rho", "1.5", "--mode", "first-q",
                     "--q", "10", "--out", str(out)] + _data(ds))
    assert code == 0
    assert "STABILITY SELECTION" in capsys.readouterr().out
    _, sel, _ = dio.read_stabsel(str(out))
    assert sel.tolist() == _truth(ds)
    assert cli.main(["plotdata", str(out), "--kind", "stabsel-profile"]) == 0
    rows = list(csv.reader(open(out / "plot_stabsel_profile.csv")))
    assert rows[0] == ["series", "x", "y", "label"]
    assert len(rows) == 1 + 100 + 1 and rows[-1][0] == "threshold"


def test_path_first_column_zero(ds, tmp_path):
    out = tmp_path / "p"
    assert cli.main(["path", "--formulation", "R1", "--lam-min-ratio", "0.01",
                     "--out", str(out)] + _data(ds)) == 0
    lams, betas, _, names = dio.read_path(str(out))
    assert np.all(betas[:, 0] == 0)
    assert names[0] == "x0"
    assert cli.main(["plotdata", str(out), "--kind", "path"]) == 0
    rows = list(csv.reader(open(out / "plot_path.csv")))
    assert len(rows) == 1 + betas.size
    assert rows[1][0] == "feature_0" and float(rows[1][1]) == lams[0]


def test_cv_and_curve(ds, tmp_path):
    out = tmp_path / "cv"
    assert cli.main(["cv", "--formulation", "R1", "--rule", "min", "--out", str(out)]
                    + _data(ds)) == 0
    assert cli.main(["plotdata", str(out), "--kind", "cv-curve"]) == 0
    rows = list(csv.DictReader(open(out / "plot_cv_curve.csv")))
    lams, mean, se = dio.read_cv(str(out))
    mean_rows = [r for r in rows if r["series"] == "mean_error"]
    assert [float(r["y"]) for r in mean_rows] == mean.tolist()
    plus = [float(r["y"]) for r in rows if r["series"] == "mean_plus_se"]
    np.testing.assert_allclose(plus, mean + se, rtol=1e-15)
    markers = {r["label"]: float(r["x"]) for r in rows if r["series"] == "marker"}
    summ = dio.read_summary(str(out))
    assert markers["lambda_min"] == pytest.approx(summ["lambda_min_error"])
    assert markers["lambda_1se"] == pytest.approx(summ["lambda_1se"])
    assert markers["lambda_1se"] >= markers["lambda_min"]


def test_config_file_and_flag_override(ds, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"formulation": "R1", "lam": 0.5, "rescaled": True,
                               "out": str(tmp_path / "a")}))
    assert cli.main(["solve", "--config", str(cfg)] + _data(ds)) == 0
    assert dio.read_summary(str(tmp_path / "a"))["formulation"] == "R1"
    assert cli.main(["solve", "--config", str(cfg), "--formulation", "R2",
                     "--out", str(tmp_path / "b")] + _data(ds)) == 0
    assert dio.read_summary(str(tmp_path / "b"))["formulation"] == "R2"


def test_unknown_config_key(ds, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert cli.main(["solve", "--config", str(cfg)] + _data(ds)) == 2


def test_features_source(tmp_path):
    f = tmp_path / "f.csv"
    rng = np.random.default_rng(0)
    M = np.hstack([rng.poisson(4, (30, 5)), rng.standard_normal((30, 1))])
    dio.write_matrix(str(f), M, ["a", "b", "c", "d", "e", "y"])
    out = tmp_path / "o"
    assert cli.main(["solve", "--features", str(f), "--response", "y", "--compositional",
                     "a,b,c,d,e", "--formulation", "R1", "--out", str(out)]) == 0
    assert dio.read_beta(str(out))[1] == ["a", "b", "c", "d", "e"]


def test_exit_usage_unknown_flag():
    with pytest.raises(SystemExit) as exc:
        cli.main(["solve", "--frobnicate"])
    assert exc.value.code == 2


def test_exit_usage_incompatible_method(ds, tmp_path):
    assert cli.main(["solve", "--formulation", "R4", "--method", "p-pds",
                     "--out", str(tmp_path)] + _data(ds)) == 2


def test_exit_usage_missing_source(tmp_path):
    assert cli.main(["solve", "--out", str(tmp_path)]) == 2


def test_exit_io_missing_file(tmp_path):
    assert cli.main(["solve", "--x", str(tmp_path / "nope.csv"), "--y", str(tmp_path / "y.csv"),
                     "--out", str(tmp_path)]) == 3


def test_exit_noconvergence_writes_partial(ds, tmp_path):
    out = tmp_path / "nc"
    code = cli.main(["solve", "--formulation", "R1", "--method", "dr", "--max-iter", "3",
                     "--lam", "0.01", "--rescaled", "--out", str(out)] + _data(ds))
    assert code == 4
    assert dio.read_summary(str(out))["converged"] is False


def test_exit_missing_result(tmp_path):
    assert cli.main(["plotdata", str(tmp_path), "--kind", "path"]) == 5


def test_synth_no_signal_stabsel_selects_nothing(tmp_path):
    quiet = 0
    for seed in range(10):
        d = tmp_path / f"z{seed}"
        cli.main(["synth", "--nonzero", "0", "--zerosum", "--seed", str(seed), "--out", str(d)])
        assert _truth(d) == []
        assert cli.main(["stabsel", "--seed", str(seed), "--formulation", "R1",
                         "--out", str(d / "r")] + _data(d)) == 0
        quiet += dio.read_stabsel(str(d / "r"))[1].size == 0
    assert quiet >= 8
