import json

from misspecopt.cli import main


def test_check_command(capsys):
    assert main(["check"]) == 0
    assert "checks passed" in capsys.readouterr().out


def test_analyze_json(tmp_path):
    assert main(["analyze", "--preset", "default", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "analysis.json").read_text())
    rep = doc["reports"]["prod_centered_sq"]["severe"]
    assert rep["verdicts"]["regret"]["holds"]


def test_analyze_text(capsys):
    assert main(["analyze", "--preset", "example1", "--format", "text"]) == 0
    assert "direction example1, severe regime" in capsys.readouterr().out


def test_simulate_and_sweep(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("problem: {dim: 1}\ndirections: [hermite2]\nalphas: [0.5, 2]\nns: [60]\n")
    out = tmp_path / "sim"
    assert main(["simulate", "--config", str(cfg), "--reps", "3", "--seed", "5", "--out", str(out),
                 "--resolution", "256"]) == 0
    assert (out / "samples_hermite2.csv").exists()
    first = (out / "samples_hermite2.csv").read_text()
    assert main(["simulate", "--config", str(cfg), "--reps", "3", "--seed", "5", "--out", str(out),
                 "--resolution", "256"]) == 0
    assert (out / "samples_hermite2.csv").read_text() == first
    out2 = tmp_path / "sweep"
    assert main(["sweep", "--config", str(cfg), "--reps", "3", "--out", str(out2)]) == 0
    doc = json.loads((out2 / "summary.json").read_text())
    assert doc["config"]["resolution"] == 512 and len(doc["verdicts"]) == 2


def test_bad_inputs_exit_nonzero(tmp_path, capsys):
    assert main(["sweep", "--config", str(tmp_path / "nope.yaml")]) == 2
    assert main(["simulate", "--preset", "default", "--direction", "nope", "--reps", "2"]) == 2
    assert "error" in capsys.readouterr().err
