import os
import shutil

import pytest

from conftest import write_pairs
from roodbench.cli import build_parser, main


@pytest.fixture
def dataset(tmp_path):
    write_pairs(tmp_path / "in", 2, shape=(16, 16, 16))
    return tmp_path


def _run(*argv):
    return main([str(a) for a in argv])


def test_help_for_every_subcommand(capsys):
    for sub in ("generate", "evaluate", "report", "compare", "preprocess"):
        with pytest.raises(SystemExit) as exc:
            main([sub, "--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        for flag in ("--seed", "--config", "--jobs", "--verbose"):
            assert flag in out
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0


def test_usage_errors(dataset, capsys):
    with pytest.raises(SystemExit) as exc:
        _run("report", "--metrics", "m.csv", "--alpha", "1.5")
    assert exc.value.code == 2
    assert "alpha must be in (0, 1]" in capsys.readouterr().err
    for argv in (["generate", "--input-dir", "x", "--output-dir", "y", "--bogus"],
                 ["generate", "--input-dir", "x", "--output-dir", "y", "--jobs", "0"],
                 ["generate", "--input-dir", "x", "--output-dir", "y", "--transforms", "blur"],
                 ["report", "--metrics", "m.csv", "--alpha", "0"]):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2


def test_bad_config_is_usage_error(dataset, capsys):
    cfg = dataset / "bad.toml"
    cfg.write_text("[noise]\nsigma_ratio = [1, 2]\n")
    code = _run("generate", "--input-dir", dataset / "in", "--output-dir", dataset / "o",
                "--config", cfg)
    assert code == 2
    assert "sigma_ratio" in capsys.readouterr().err


def test_env_config(dataset, monkeypatch):
    cfg = dataset / "t.toml"
    cfg.write_text("[noise]\nsigma_ratio = [0.01, 0.02, 0.03, 0.04, 0.05]\n")
    monkeypatch.setenv("ROODBENCH_CONFIG", str(cfg))
    assert _run("generate", "--input-dir", dataset / "in", "--output-dir", dataset / "o",
                "--transforms", "noise") == 0
    assert '"sigma_ratio":[0.01' in (dataset / "o" / "manifest.csv").read_text()


def test_full_workflow(dataset, capsys):
    out = dataset / "out"
    assert _run("generate", "--input-dir", dataset / "in", "--output-dir", out, "--seed", "42",
                "--transforms", "noise,affine") == 0
    assert (out / "manifest.csv").exists()
    pred = dataset / "pred"
    os.makedirs(pred)
    for name in os.listdir(out / "labels"):
        shutil.copy(out / "labels" / name, pred / name.replace("_label", ""))
    metrics = dataset / "metrics.csv"
    assert _run("evaluate", "--manifest", out / "manifest.csv", "--pred-dir", pred,
                "--output", metrics) == 0
    assert _run("report", "--metrics", metrics, "--output-dir", dataset / "rep") == 0
    assert sorted(os.listdir(dataset / "rep")) == [
        "report.json", "report_curves.csv", "report_degradation.csv", "report_weighted.csv"]
    comparison = dataset / "cmp.csv"
    assert _run("compare", "--metrics-a", metrics, "--metrics-b", metrics,
                "--output", comparison) == 0
    lines = comparison.read_text().splitlines()
    assert len(lines) == 1 + 11 and all(",false," in line for line in lines[1:])
    assert capsys.readouterr().out == ""


def test_compare_default_output(dataset, monkeypatch):
    monkeypatch.chdir(dataset)
    metrics = dataset / "m.csv"
    metrics.write_text("sample_id,transform,severity,dsc,hd95_mm,null_prediction,status\n"
                       "a,clean,0,0.5,1.0,false,ok\n")
    assert _run("compare", "--metrics-a", metrics, "--metrics-b", metrics) == 0
    assert (dataset / "comparison.csv").exists()


def test_missing_predictions_exit_one(dataset):
    out = dataset / "out"
    assert _run("generate", "--input-dir", dataset / "in", "--output-dir", out,
                "--transforms", "noise") == 0
    os.makedirs(dataset / "pred")
    assert _run("evaluate", "--manifest", out / "manifest.csv", "--pred-dir", dataset / "pred",
                "--output", dataset / "m.csv") == 1


def test_generate_unmatched_input(tmp_path, capsys):
    write_pairs(tmp_path / "in", 1, shape=(8, 8, 8))
    os.remove(tmp_path / "in" / "case_00_label.nii.gz")
    assert _run("generate", "--input-dir", tmp_path / "in", "--output-dir", tmp_path / "o") == 2
    assert "case_00" in capsys.readouterr().err


def test_reproducible_bytes(dataset):
    for name in ("a", "b"):
        assert _run("generate", "--input-dir", dataset / "in", "--output-dir", dataset / name,
                    "--seed", "7", "--transforms", "elastic_deformation,ghosting") == 0
    for sub in ("images", "labels"):
        for f in os.listdir(dataset / "a" / sub):
            assert (dataset / "a" / sub / f).read_bytes() == (dataset / "b" / sub / f).read_bytes()


def test_preprocess(tmp_path):
    from roodbench.volume import LabelVolume, Volume, load_volume, save_label, save_volume
    import numpy as np
    os.makedirs(tmp_path / "in")
    rng = np.random.default_rng(0)
    save_volume(Volume(rng.normal(5, 2, (10, 12, 6)), spacing=(2, 1, 3), orientation=("L", "P", "S")),
                tmp_path / "in" / "x.nii.gz")
    save_label(LabelVolume(rng.random((10, 12, 6)) > 0.5, spacing=(2, 1, 3), orientation=("L", "P", "S")),
               tmp_path / "in" / "x_label.nii.gz")
    assert _run("preprocess", "--input-dir", tmp_path / "in", "--output-dir", tmp_path / "pp") == 0
    v = load_volume(tmp_path / "pp" / "x.nii.gz")
    assert v.orientation == ("R", "A", "S") and v.spacing == (1.0, 1.0, 1.0)
    assert v.shape == (20, 12, 18)
    assert abs(v.data.mean()) < 1e-5 and abs(v.data.std() - 1) < 1e-5


def test_parser_defaults():
    args = build_parser().parse_args(["report", "--metrics", "m"])
    assert args.alpha == pytest.approx(2 / 3) and args.jobs == 1 and args.seed == 0
    args = build_parser().parse_args(["compare", "--metrics-a", "a", "--metrics-b", "b"])
    assert args.significance == 0.01 and args.comparisons == 5
