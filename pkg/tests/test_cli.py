import csv
import json
import subprocess
import sys

import pytest

from manifoldron.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main, manifold_name


def run(argv):
    try:
        return main([str(a) for a in argv])
    except SystemExit as exc:
        return exc.code


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def toy(tmp_path_factory):
    out = tmp_path_factory.mktemp("toy")
    assert run(["generate", "moons", "-o", out, "--n", 200, "--split", 0.7, "--seed", 1]) == EXIT_OK
    model = out / "m.bin"
    assert run(["fit", out / "moons_train.csv", "-o", model, "--neighbors", 14, "--processes", 1]) == EXIT_OK
    return out, model


class TestGenerate:
    def test_six_circles(self, tmp_path, capsys):
        assert run(["generate", "six-circles", "-o", tmp_path]) == EXIT_OK
        train, test = rows(tmp_path / "six-circles_train.csv"), rows(tmp_path / "six-circles_test.csv")
        assert train[0] == ["x", "y", "z", "label"] and len(train) == 7345
        assert {r[3] for r in test[1:]} == {"blue", "red"}
        assert "wrote" in capsys.readouterr().out

    def test_function(self, tmp_path):
        assert run(["generate", "f3", "-o", tmp_path, "--n", 50]) == EXIT_OK
        assert rows(tmp_path / "f3.csv")[0] == ["x", "y", "target"]

    def test_names(self):
        assert manifold_name("two-curly-spirals") == "TwoCurlySpirals"
        assert manifold_name("dna") == "DNA"
        assert manifold_name("moons") is None

    def test_unknown_kind(self, tmp_path, capsys):
        assert run(["generate", "blobs", "-o", tmp_path]) == EXIT_USAGE
        assert "unknown dataset" in capsys.readouterr().err


class TestFitEvalPredict:
    def test_eval_prints_report(self, toy, tmp_path, capsys):
        out, model = toy
        assert run(["eval", model, out / "moons_test.csv", "--json", tmp_path / "r.json"]) == EXIT_OK
        text = capsys.readouterr().out
        assert "accuracy:" in text and "[metrics]" in text
        data = json.loads((tmp_path / "r.json").read_text())
        assert data["mean"]["accuracy"] > 0.8

    def test_predict_writes_labels(self, toy, tmp_path):
        out, model = toy
        assert run(["predict", model, out / "moons_test.csv", "-o", tmp_path / "p.csv"]) == EXIT_OK
        got = rows(tmp_path / "p.csv")
        assert got[0] == ["label"] and len(got) == 61
        assert {r[0] for r in got[1:]} <= {"0", "1"}

    def test_predict_to_stdout_without_labels(self, toy, tmp_path, capsys):
        _, model = toy
        (tmp_path / "x.csv").write_text("0.0,0.5\n1.0,-0.5\n")
        assert run(["predict", model, tmp_path / "x.csv"]) == EXIT_OK
        assert capsys.readouterr().out.splitlines()[0] == "label"

    def test_bad_dims(self, toy, tmp_path, capsys):
        _, model = toy
        (tmp_path / "bad.csv").write_text("1,2,3,4\n")
        assert run(["predict", model, tmp_path / "bad.csv"]) == EXIT_DATA
        assert "expects 2 features" in capsys.readouterr().err

    def test_eval_needs_labels(self, toy, tmp_path):
        _, model = toy
        (tmp_path / "x.csv").write_text("0.0,0.5\n")
        assert run(["eval", model, tmp_path / "x.csv"]) == EXIT_DATA

    def test_regressor(self, tmp_path, capsys):
        assert run(["generate", "f2", "-o", tmp_path, "--split", 0.8]) == EXIT_OK
        model = tmp_path / "r.bin"
        assert run(["fit", tmp_path / "f2_train.csv", "-o", model, "--regress"]) == EXIT_OK
        assert run(["eval", model, tmp_path / "f2_test.csv"]) == EXIT_OK
        assert "mse:" in capsys.readouterr().out
        assert run(["predict", model, tmp_path / "f2_test.csv", "-o", tmp_path / "p.csv"]) == EXIT_OK
        assert rows(tmp_path / "p.csv")[0] == ["prediction"]

    def test_missing_files(self, toy, tmp_path):
        _, model = toy
        assert run(["fit", tmp_path / "none.csv", "-o", tmp_path / "m"]) == EXIT_DATA
        assert run(["predict", tmp_path / "none.bin", tmp_path / "none.csv"]) == EXIT_DATA

    def test_corrupt_model(self, toy, tmp_path, capsys):
        out, model = toy
        (tmp_path / "cut.bin").write_bytes(model.read_bytes()[:-9])
        assert run(["eval", tmp_path / "cut.bin", out / "moons_test.csv"]) == EXIT_DATA
        assert "checksum" in capsys.readouterr().err


class TestUsage:
    @pytest.mark.parametrize("argv", [
        [],
        ["fit"],
        ["fit", "x.csv", "-o", "m", "--bogus"],
        ["fit", "x.csv", "-o", "m", "--bag-features", "7..4"],
        ["fit", "x.csv", "-o", "m", "--distance-mode", "cosine"],
        ["frobnicate"],
    ])
    def test_exit_one(self, argv, capsys):
        assert run(argv) == EXIT_USAGE
        assert "error" in capsys.readouterr().err

    def test_bad_fixed(self, toy, tmp_path):
        _, model = toy
        argv = ["grid", model, "--bounds", -1, 2, -1, 1, "--fixed", "a,b", "-o", tmp_path / "g.csv"]
        assert run(argv) == EXIT_USAGE


class TestGridAndBench:
    def test_grid(self, toy, tmp_path):
        _, model = toy
        argv = ["grid", model, "--bounds", -1.5, 2.5, -1, 1.5, "--resolution", 8, 5, "-o", tmp_path / "g.csv"]
        assert run(argv) == EXIT_OK
        got = rows(tmp_path / "g.csv")
        assert got[0] == ["row", "col", "x", "y", "label", "interior"] and len(got) == 41

    def test_bench_generator_name(self, tmp_path, capsys):
        argv = ["bench", "circles", "--runs", 2, "--processes", 1, "--json", tmp_path / "b.json"]
        assert run(argv) == EXIT_OK
        assert "runs: 2" in capsys.readouterr().out
        assert len(json.loads((tmp_path / "b.json").read_text())["runs"]) == 2

    def test_bench_spec_file(self, toy, tmp_path, capsys):
        out, _ = toy
        spec = {"dataset": {"csv": str(out / "moons.csv")}, "config": {"k": 10}, "runs": 2, "split": 0.6}
        (tmp_path / "spec.json").write_text(json.dumps(spec))
        assert run(["bench", tmp_path / "spec.json", "--processes", 1]) == EXIT_OK
        block = capsys.readouterr().out.split("[metrics]\n")[1].split("\n[/metrics]")[0]
        data = json.loads(block)
        assert data["config"]["k"] == 10 and data["config"]["train_fraction"] == 0.6
        assert [r["n_test"] for r in data["runs"]] == [80, 80]

    def test_bench_bad_spec(self, tmp_path):
        (tmp_path / "s.json").write_text("{not json")
        assert run(["bench", tmp_path / "s.json"]) == EXIT_DATA
        (tmp_path / "t.json").write_text(json.dumps({"dataset": {"csv": "x.csv"}, "config": {"depth": 3}}))
        (tmp_path / "x.csv").write_text("0,0,a\n1,1,b\n0,1,a\n1,0,b\n")
        assert run(["bench", tmp_path / "t.json"]) == EXIT_DATA


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "manifoldron.cli", "generate", "spirals", "-o", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "spirals.csv").exists()
    proc = subprocess.run([sys.executable, "-m", "manifoldron.cli", "fit"], capture_output=True, text=True)
    assert proc.returncode == 1
