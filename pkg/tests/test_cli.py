import json
import shutil
import subprocess
import sys

import pytest

from dppersonal import attacks
from dppersonal.harness import cli
from dppersonal.harness.lemmas import run_lemma_suite


def write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


BASE = {"problem": "mean", "framework": "jdp", "d": 30, "t": 6, "rho": 1.0, "trials": 200}


def test_run_outputs_report(tmp_path, capsys):
    conf = write(tmp_path, "c.json", BASE)
    out = tmp_path / "r.csv"
    code = cli.main(["run", "--config", conf, "--seed", "3", "--out", str(out)])
    assert code == cli.EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["trials"] == 200 and report["bound_satisfied"] is True
    assert len(out.read_text().splitlines()) == 201


def test_run_json_and_overrides(tmp_path, capsys):
    conf = write(tmp_path, "c.json", BASE)
    out = tmp_path / "r.json"
    assert cli.main(["run", "--config", conf, "--trials", "7", "--format", "json",
                     "--out", str(out), "--parallelism", "2"]) == 0
    assert len(json.loads(out.read_text())) == 7


def test_logs_resolved_config(tmp_path, caplog):
    conf = write(tmp_path, "c.json", dict(BASE, rho=None, epsilon=1.0, delta=1e-6))
    with caplog.at_level("INFO", logger="dppersonal"):
        assert cli.main(["run", "--config", conf, "--seed", "42", "--trials", "3"]) == 0
    msg = " ".join(r.getMessage() for r in caplog.records)
    assert "seed=42" in msg and "'rho': 0.0174" in msg


def test_config_errors(tmp_path):
    assert cli.main(["run", "--config", write(tmp_path, "b.json", dict(BASE, d=0))]) == 1
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == 1
    assert cli.main(["run"]) == 1
    assert cli.main(["convert", "--epsilon", "1"]) == 1
    assert cli.main(["run", "--config", write(tmp_path, "c.json", BASE),
                     "--parallelism", "0"]) == 1
    bad_attack = dict(BASE, framework="billboard", trials=1000, delta=0.01)
    assert cli.main(["attack", "--config", write(tmp_path, "a.json", bad_attack)]) == 1


def test_io_error(tmp_path):
    conf = write(tmp_path, "c.json", BASE)
    assert cli.main(["run", "--config", conf, "--out",
                     str(tmp_path / "missing" / "r.csv")]) == cli.EXIT_IO


def test_violation_exit_code(monkeypatch):
    corrupted = lambda: run_lemma_suite(weight=lambda a, p: 0.5 * attacks.r_weight(a, p))
    monkeypatch.setattr(cli, "run_lemma_suite", corrupted)
    assert cli.main(["lemmas"]) == cli.EXIT_VIOLATION


def test_lemmas(tmp_path, capsys):
    out = tmp_path / "lemmas.json"
    assert cli.main(["lemmas", "--out", str(out)]) == 0
    assert json.loads(capsys.readouterr().out)["ok"] is True
    assert json.loads(out.read_text())["ok"] is True


def test_convert(capsys):
    assert cli.main(["convert", "--rho", "1", "--delta", "0.36787944117144233"]) == 0
    assert json.loads(capsys.readouterr().out)["epsilon"] == pytest.approx(3.0)
    assert cli.main(["convert", "--epsilon", "1", "--delta", "1e-6"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["round_trip_epsilon"] <= 1.0


def test_sweep(tmp_path, capsys):
    conf = write(tmp_path, "s.json", dict(BASE, framework="billboard", trials=300, t=10,
                                          sweep={"d": [50, 100, 200]}))
    out = tmp_path / "s.csv"
    assert cli.main(["sweep", "--config", conf, "--out", str(out)]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["ok"] and len(res["table"]) == 12
    assert len(out.read_text().splitlines()) == 1 + 12 * 300
    no_axis = write(tmp_path, "n.json", BASE)
    assert cli.main(["sweep", "--config", no_axis]) == 1


def test_attack(tmp_path, capsys):
    conf = write(tmp_path, "a.json", dict(BASE, framework="billboard", d=200, t=10,
                                          trials=1000, epsilon=1.0, delta=1e-6, rho=None))
    out = tmp_path / "a.csv"
    assert cli.main(["attack", "--config", conf, "--out", str(out)]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["passed"] and "statistic_check" in res


def test_byte_identical_outputs(tmp_path):
    conf = write(tmp_path, "c.json", dict(BASE, framework="billboard"))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    cli.main(["run", "--config", conf, "--seed", "1", "--out", str(a)])
    cli.main(["run", "--config", conf, "--seed", "1", "--out", str(b), "--parallelism", "2"])
    assert a.read_bytes() == b.read_bytes()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "dppersonal", "convert", "--rho", "0",
                           "--delta", "0.1"], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["epsilon"] == 0.0


@pytest.mark.skipif(shutil.which("dppersonal") is None, reason="console script not on PATH")
def test_console_script():
    proc = subprocess.run(["dppersonal", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "lemmas" in proc.stdout
