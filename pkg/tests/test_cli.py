import json

import pytest

from adaptqp.cli import main
from adaptqp.dataio import gen_toy_two_class, write_features


@pytest.fixture
def toy_files(tmp_path):
    source, target = gen_toy_two_class(0)
    paths = tmp_path / "source.csv", tmp_path / "target.svm"
    write_features(source, paths[0], "csv")
    write_features(target, paths[1], "svmlight")
    return [str(p) for p in paths]


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "run" in capsys.readouterr().out


def test_run_synthetic_to_stdout(capsys):
    code = main(["run", "--setting", "baseline", "--setting", "mmdtl2", "--synthetic", "toy",
                 "--folds", "3"])
    assert code == 0
    rows = json.loads(capsys.readouterr().out)
    assert len(rows) == 6
    assert {r["setting"] for r in rows} == {"baseline", "mmdtl2"}


def test_run_files_to_csv(toy_files, tmp_path):
    out = tmp_path / "report.csv"
    code = main(["run", "--setting", "mmdt", "--source", toy_files[0], "--target", toy_files[1],
                 "--folds", "2", "--out", str(out)])
    assert code == 0
    assert len(out.read_text().strip().split("\n")) == 3


def test_run_grid_expands_hyperparameters(capsys):
    assert main(["run", "--setting", "source-only", "--synthetic", "toy", "--folds", "2",
                 "--grid"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert len(rows) == 12 * 2
    assert {(r["c_source"], r["d_weight"]) for r in rows} >= {(0.1, 0.01), (10.0, 10.0)}


@pytest.mark.parametrize("argv", [
    ["run", "--setting", "nonsense", "--synthetic", "toy"],
    ["run", "--setting", "mmdt"],
    ["run", "--setting", "mmdt", "--synthetic", "shifted"],
    ["run", "--setting", "mmdt", "--synthetic", "toy", "--dims", "8"],
    ["run", "--setting", "mmdt", "--synthetic", "shifted", "--dims", "a,b"],
    ["run", "--setting", "mmdt", "--synthetic", "toy", "--folds", "1"],
    ["run", "--setting", "mmdt", "--synthetic", "toy", "--ct", "-1"],
    ["run", "--setting", "mmdt", "--source", "/no/such/file.csv", "--target", "/no/such.csv"],
    ["bench", "--dims", "0"],
    ["frobnicate"],
])
def test_invalid_arguments_exit_one(argv, capsys):
    assert main(argv) == 1


def test_malformed_data_file_exits_one(tmp_path, toy_files, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2,3\n2,1\n")
    assert main(["run", "--setting", "mmdt", "--source", str(bad), "--target", toy_files[1]]) == 1
    assert "line 2" in capsys.readouterr().err


def test_runtime_failure_exits_two(monkeypatch, capsys):
    import adaptqp.harness as harness

    def boom(*args, **kwargs):
        raise FloatingPointError("solver blew up")

    monkeypatch.setattr(harness, "train_ovr", boom)
    assert main(["run", "--setting", "baseline", "--synthetic", "toy", "--folds", "2"]) == 2
    assert "solver blew up" in capsys.readouterr().err


def test_audit(capsys, tmp_path):
    out = tmp_path / "audit.json"
    assert main(["audit", "--seed", "3", "--instances", "3", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["passed"] and len(doc["instances"]) == 3
    assert "3/3" in capsys.readouterr().err


def test_failed_audit_exits_two(monkeypatch, capsys):
    import adaptqp.oracle as oracle

    monkeypatch.setattr(oracle, "audit_suite", lambda seed, n: (False, [{"passed": False}]))
    assert main(["audit", "--instances", "1"]) == 2


def test_bench(capsys):
    assert main(["bench", "--dims", "4", "--repeats", "1", "--n-target", "10",
                 "--n-source", "20"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert {r["path"] for r in rows} == {"primal", "dual"}
