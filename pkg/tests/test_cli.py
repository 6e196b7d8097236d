import csv
import io
import json
import subprocess
import sys
from importlib.resources import files

import pytest

from protosim.cli import EXIT_EXPECT, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from protosim.params import PRESET_DIR_ENV

SCRIPTS = files("protosim.scripts")


@pytest.fixture
def script(tmp_path):
    def make(name_or_text, fname="s.proto"):
        text = SCRIPTS.joinpath(name_or_text).read_text() if name_or_text.endswith(".proto") else name_or_text
        p = tmp_path / fname
        p.write_text(text)
        return str(p)
    return make


def read_csv(path):
    return list(csv.DictReader(io.StringIO(open(path).read())))


def test_run_ok_writes_json(script, tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["run", script("generate.proto"), "--json", str(out)]) == EXIT_OK
    d = json.loads(out.read_text())
    assert d["passed"] and len(d["expects"]) == 2
    err = capsys.readouterr().err
    assert "PASS line" in err


def test_run_json_to_stdout_is_byte_identical(script, capsys):
    path = script("swap.proto")
    main(["run", path, "--json", "-"])
    first = capsys.readouterr().out
    main(["run", path, "--json", "-"])
    assert capsys.readouterr().out == first
    assert json.loads(first)["passed"]


def test_expect_failure_exit_code(script):
    text = "params rb85\ncavity C1\natom a1\natom a2\nbragg a1 C1\nbragg a2 C1\nexpect entropy a1|a2 0 1e-9\n"
    assert main(["run", script(text)]) == EXIT_EXPECT


def test_usage_and_parse_errors(script, capsys):
    assert main([]) == EXIT_USAGE
    assert main(["run"]) == EXIT_USAGE
    assert main(["sweep", "x.proto", "--var", "v"]) == EXIT_USAGE
    assert main(["run", script("params rb85\nfoo\n")]) == EXIT_USAGE
    assert "line 2" in capsys.readouterr().err
    assert main(["run", "/nonexistent/file.proto"]) == EXIT_USAGE
    assert main(["validate", "--preset", "cs133", "--csv", "-"]) == EXIT_USAGE


def test_runtime_error_exit_code(script):
    # an impossible detection leaves nothing to normalize
    text = "params rb85\ncavity C1 0\ndetect C1 1\n"
    assert main(["run", script(text)]) == EXIT_RUNTIME


def test_params_override_flag(script, tmp_path):
    out = tmp_path / "r.json"
    assert main(["run", script("generate.proto"), "--params", "he4", "--json", str(out)]) == EXIT_OK
    assert json.loads(out.read_text())["params"]["name"] == "he4"


def test_sweep_csv_adiabatic(script, tmp_path):
    out = tmp_path / "s.csv"
    rc = main(["sweep", script("adiabatic.sweep.proto"), "--var", "ratio", "--grid", "1e2,1e3,1e4",
               "--csv", str(out), "--workers", "1"])
    assert rc == EXIT_OK
    rows = read_csv(out)
    assert [r["ratio"] for r in rows] == ["1e2", "1e3", "1e4"]
    inf = [float(r["infidelity"]) for r in rows]
    assert inf[0] > inf[1] > inf[2]


def test_sweep_over_presets(script, tmp_path):
    out = tmp_path / "p.csv"
    assert main(["sweep", script("presets.sweep.proto"), "--var", "preset", "--grid", "rb85,he4",
                 "--csv", str(out)]) == EXIT_OK
    rows = read_csv(out)
    assert [r["preset"] for r in rows] == ["rb85", "he4"]
    assert all(abs(float(r["transfer_probability"]) - 1) < 1e-2 for r in rows)
    assert all(r["status"] == "ok" for r in rows)


def test_validate_csv_and_monotone(tmp_path, capsys):
    out = tmp_path / "v.csv"
    assert main(["validate", "--preset", "rb85", "--csv", str(out)]) == EXIT_OK
    rows = read_csv(out)
    assert [r["case"] for r in rows] == ["sweep", "sweep", "sweep", "rb85"]
    assert "monotone in Delta/omega_r: True" in capsys.readouterr().err


def test_preset_dir_env(tmp_path, monkeypatch, script):
    (tmp_path / "wide.preset").write_text("base = rb85\ndelta = 3 GHz\n")
    monkeypatch.setenv(PRESET_DIR_ENV, str(tmp_path))
    out = tmp_path / "v.csv"
    assert main(["validate", "--preset", "wide", "--ratios", "1e2,1e3", "--csv", str(out)]) == EXIT_OK
    assert read_csv(out)[-1]["case"] == "wide"
    rj = tmp_path / "r.json"
    assert main(["run", script("generate.proto"), "--params", "wide", "--json", str(rj)]) == EXIT_OK
    assert json.loads(rj.read_text())["params"]["name"] == "wide"


def test_module_entry_point(script):
    proc = subprocess.run([sys.executable, "-m", "protosim", "run", script("generate.proto")],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_OK, proc.stderr
