import json
from pathlib import Path

import pandas as pd
import pytest

from upliftkit.cli import main
from upliftkit.synthetic import make_email_like


@pytest.fixture(scope="module")
def email_csv(tmp_path_factory):
    p = tmp_path_factory.mktemp("data") / "email.csv"
    make_email_like(n=4000, seed=11).to_csv(p, index=False)
    return p


def run(*argv):
    return main([str(a) for a in argv])


def snapshot(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def common(data, out):
    return ["--data", data, "--outcome", "visit", "--out", out]


def test_split_fit_predict_eval(email_csv, tmp_path):
    assert run("split", *common(email_csv, tmp_path / "s"), "--seed", 3) == 0
    train, valid = tmp_path / "s/tables/train.csv", tmp_path / "s/tables/valid.csv"
    assert len(pd.read_csv(train)) + len(pd.read_csv(valid)) == 4000
    assert run("fit", *common(train, tmp_path / "f"), "--estimator", "dual") == 0
    model = tmp_path / "f/models/model.json"
    assert json.loads(model.read_text())["kind"] == "dual"
    assert run("predict", *common(valid, tmp_path / "p"), "--model", model) == 0
    preds = tmp_path / "p/tables/predictions.csv"
    assert run("eval", *common(preds, tmp_path / "e"), "--nb-group", 5) == 0
    report = json.loads((tmp_path / "e/report.json").read_text())
    assert set(report) >= {"qini", "qini_raw", "overall_uplift"}
    for name in ("tables/qini_table.csv", "plots/qini_curve.svg", "plots/qini_bars.svg"):
        assert (tmp_path / "e" / name).is_file()


def test_eval_constant_predictions(email_csv, tmp_path):
    frame = pd.read_csv(email_csv).assign(uplift_prediction=0.0)
    frame.to_csv(tmp_path / "c.csv", index=False)
    assert run("eval", *common(tmp_path / "c.csv", tmp_path / "o")) == 0
    report = json.loads((tmp_path / "o/report.json").read_text())
    assert abs(report["qini"]) < 100 * report["overall_uplift"] / 10


def test_select_reports_value(email_csv, tmp_path, capsys):
    assert run("select", *common(email_csv, tmp_path), "--nb-lambda", 15, "--report-value") == 0
    out = capsys.readouterr().out
    assert out.startswith("lambda = ")
    scan = pd.read_csv(tmp_path / "tables/lambda_scan.csv")
    assert list(scan.columns) == ["lambda", "active_size", "qini"] and len(scan) == 15
    terms = json.loads((tmp_path / "models/selected_terms.json").read_text())
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["best_qini"] == scan["qini"].max()
    assert terms == report["selected_terms"]


def test_bin_prints_cuts_or_no_split(email_csv, tmp_path, capsys):
    assert run("bin", *common(email_csv, tmp_path), "--x", "history", "--n-split", 20) == 0
    assert "has been cut at:" in capsys.readouterr().out
    assert (tmp_path / "plots/bin_history.svg").is_file()
    assert run("bin", *common(email_csv, tmp_path / "n"), "--x", "recency", "--alpha", 1e-9) == 0
    assert capsys.readouterr().out.startswith("no significant split for recency")


def test_square_and_squarecv(email_csv, tmp_path):
    assert run("square", *common(email_csv, tmp_path), "--var1", "recency", "--var2", "history", "--n-split", 3, "--nb-group", 2) == 0
    aug = pd.read_csv(tmp_path / "tables/augmented.csv")
    assert {"Uplift_recency_history", "Cat_recency_history"} <= set(aug.columns)
    assert (tmp_path / "plots/square_recency_history.svg").is_file()
    assert run("squarecv", *common(email_csv, tmp_path / "cv"), "--var1", "recency", "--var2", "history", "--b-grid", "2,3", "--c-grid", "2") == 0
    assert len(pd.read_csv(tmp_path / "cv/tables/squarecv.csv")) == 2


def test_errors_exit_nonzero_with_module(email_csv, tmp_path, capsys):
    assert run("eval", *common(tmp_path / "missing.csv", tmp_path)) != 0
    assert run("bin", *common(email_csv, tmp_path), "--x", "nope") != 0
    assert "error in data" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        run("bin", "--bogus-flag")


def test_pipeline_deterministic_and_composed(email_csv, tmp_path):
    args = ["--nb-lambda", 12, "--bin", "history:20:0.05", "--seed", 5]
    assert run("pipeline", *common(email_csv, tmp_path / "a"), *args) == 0
    assert run("pipeline", *common(email_csv, tmp_path / "b"), *args) == 0
    assert snapshot(tmp_path / "a") == snapshot(tmp_path / "b")
    comp = pd.read_csv(tmp_path / "a/tables/comparison.csv")
    assert comp["model"].iloc[0].startswith("Baseline")

    # stage-by-stage run reproduces the pipeline's two-model baseline
    s = tmp_path / "stages"
    run("split", *common(email_csv, s), "--seed", 5)
    run("fit", *common(s / "tables/train.csv", s), "--estimator", "dual")
    run("predict", *common(s / "tables/valid.csv", s), "--model", s / "models/model.json")
    run("eval", *common(s / "tables/predictions.csv", s), "--nb-group", 5)
    staged = json.loads((s / "report.json").read_text())["qini"]
    assert staged == pytest.approx(comp["qini"].iloc[0], abs=1e-12)
    assert (s / "models/model.json").read_text() == (tmp_path / "a/models/baseline_dual.json").read_text()
