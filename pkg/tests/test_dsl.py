import csv
import io
import json
import math
from importlib.resources import files
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from protosim.dsl import (
    ScriptError,
    eval_number,
    load_script,
    parse_grid,
    parse_script,
    rows_to_csv,
    run_script,
    serialize_script,
    sweep,
)
from protosim.dynamics.ladder import SWEEP_COLUMNS

GOLDEN = Path(__file__).parent / "golden"
SCRIPTS = files("protosim.scripts")


def shipped(name):
    return SCRIPTS.joinpath(name).read_text(encoding="utf-8")


def as_json(tree):
    return json.loads(json.dumps(tree))


# -- parsing ------------------------------------------------------------------------

def test_generate_script_matches_golden_tree():
    script = parse_script(shipped("generate.proto"))
    golden = json.loads((GOLDEN / "generate_tree.json").read_text())
    assert as_json(script.tree()) == golden
    ops = [s for s in script.steps if not s.keyword.startswith("expect")]
    assert len(ops) == 9


def test_empty_script_is_valid():
    for text in ("", "\n\n", "# nothing here\n   \n"):
        script = parse_script(text)
        assert len(script) == 0
        report = run_script(script)
        assert report.passed and report.steps == []


@pytest.mark.parametrize("text, line, fragment", [
    ("params rb85\natom a1\nbragg a9 C1 auto\n", 3, "undefined atom"),
    ("params rb85\ncavity C1\nfoo bar\n", 3, "unknown keyword"),
    ("params rb85\ncavity C1 vacuum\n", 2, "cavity preparation"),
    ("params nowhere\n", 1, "unknown preset"),
    ("params rb85\natom a1\natom a1\n", 3, ""),
    ("params rb85\natom a1\npulse a1 P-2 -pi\n", 3, "non-negative"),
    ("params rb85\natom a1\npulse a1 P-2 pi 0 sideways\n", 3, "convention"),
    ("params rb85\ncavity C1\natom a1\nbragg a1 C1 auto\nmeasure a1 int g,e\n", 5, "outcome labels"),
    ("params rb85\ncavity C1\ndetect C1 1,0\n", 3, "photon counts"),
    ("params rb85\noracle lmax=\n", 2, "oracle option"),
    ("params rb85\nexpect entropy a1 1 0\n", 2, ""),
    ("params rb85\natom a1\nramsey 'a1\n", 3, ""),
    ("params rb85\natom a1\npulse a1 P-2 pi+import\n", 3, "theta"),
])
def test_script_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ScriptError) as info:
        parse_script(text)
    assert info.value.line == line
    assert fragment in str(info.value)
    assert str(info.value).startswith(f"line {line}")


def test_eval_number():
    assert eval_number("-pi/2") == -math.pi / 2
    assert eval_number("2*pi**2") == pytest.approx(2 * math.pi ** 2)
    for bad in ("__import__('os')", "1/0", "e", "True", "1e400"):
        with pytest.raises(ValueError):
            eval_number(bad)


def test_defaults_are_filled_in():
    s = parse_script("params rb85\ncavity C1\natom a1\nbragg a1 C1\npulse a1 * pi/2\naux x C1\n")
    tree = s.tree()
    assert tree[1]["initial"] == "superposition"
    assert (tree[2]["internal"], tree[2]["momentum"]) == ("g", "P0")
    assert tree[3]["duration"] == "auto"
    assert (tree[4]["phi"], tree[4]["convention"]) == ("0", "negative")
    assert tree[5]["outcome"] == "e"


# -- round-trip ---------------------------------------------------------------------

@pytest.mark.parametrize("name", ["generate.proto", "swap.proto", "delayed.proto"])
def test_round_trip_fixed_point_on_shipped_scripts(name):
    first = parse_script(shipped(name))
    text = serialize_script(first)
    second = parse_script(text)
    assert second == first
    assert serialize_script(second) == text


_angle = st.sampled_from(["pi", "pi/2", "0", "3*pi/4", "0.25", "2*pi - 1"])


@st.composite
def scripts(draw):
    lines = ["params rb85" + draw(st.sampled_from(["", " delta_over_omega_r=1000", " 'delta=2 GHz'"]))]
    lines.append("cavity C1 " + draw(st.sampled_from(["superposition", "0", "1"])))
    atoms = [f"a{i}" for i in range(draw(st.integers(1, 3)))]
    for a in atoms:
        lines.append(f"atom {a} {draw(st.sampled_from('ge'))} {draw(st.sampled_from(['P0', 'P-2']))}")
    for _ in range(draw(st.integers(0, 8))):
        a = draw(st.sampled_from(atoms))
        kind = draw(st.sampled_from(["bragg", "pulse", "ramsey", "had", "phase"]))
        if kind == "bragg":
            lines.append(f"bragg {a} C1 {draw(st.sampled_from(['auto', '1e-6', '2.5e-5']))}")
        elif kind == "pulse":
            arm = draw(st.sampled_from(["P0", "P-2", "*"]))
            conv = draw(st.sampled_from(["positive", "negative"]))
            lines.append(f"pulse {a} {arm} '{draw(_angle)}' '-{draw(_angle)}' {conv}")
        elif kind == "ramsey":
            lines.append(f"ramsey {a}")
        elif kind == "had":
            lines.append(f"hadamard-momentum {a}")
        else:
            lines.append(f"phase C1 '{draw(_angle)}'")
    if draw(st.booleans()):
        lines.append("oracle branch=excited beta_t=pi/2 tol=1e-6")
    if len(atoms) > 1 and draw(st.booleans()):
        lines.append(f"expect entropy {atoms[0]}|{atoms[1]} 0.5 1e-3")
    return "\n".join(lines) + "\n"


@settings(max_examples=150, deadline=None)
@given(scripts())
def test_round_trip_fixed_point_property(text):
    first = parse_script(text)
    again = parse_script(serialize_script(first))
    assert again == first
    assert serialize_script(again) == serialize_script(first)


# -- running ------------------------------------------------------------------------

@pytest.mark.parametrize("name", ["generate.proto", "swap.proto", "delayed.proto"])
def test_shipped_scripts_pass_and_repeat_byte_identically(name):
    script = parse_script(shipped(name))
    a, b = run_script(script), run_script(script)
    assert a.passed
    assert a.to_json() == b.to_json()
    assert a.to_json().endswith("\n") and "wall_time" not in a.to_json()


def test_trace_adds_snapshots():
    script = parse_script(shipped("generate.proto"))
    plain, traced = run_script(script).to_dict(), run_script(script, trace=True).to_dict()
    assert len(plain["steps"]) == len(traced["steps"])
    assert any("state" in s for s in traced["steps"])
    assert not any("state" in s for s in plain["steps"])


def test_failing_expectation_is_reported_not_raised():
    text = shipped("generate.proto").replace("expect entropy a1|a2 1.0 1e-9", "expect entropy a1|a2 0.5 1e-9")
    report = run_script(parse_script(text))
    assert not report.passed
    assert [e["passed"] for e in report.expects] == [True, False]
    assert report.expects[1]["value"] == pytest.approx(1.0)


def test_swap_script_enumerates_sixteen_outcomes():
    report = run_script(parse_script(shipped("swap.proto")))
    rows = report.outcome_tables[0]["rows"]
    assert len(rows) == 16
    # probabilities are conditional on the auxiliary detections
    assert math.fsum(r["probability"] for r in rows) == pytest.approx(1.0, abs=1e-12)


def test_script_hash_tracks_text():
    a = run_script(parse_script("params rb85\n"))
    b = run_script(parse_script("params rb85 \n# changed\n"))
    assert a.script_hash != b.script_hash


def test_load_script_from_file(tmp_path):
    p = tmp_path / "g.proto"
    p.write_text(shipped("generate.proto"))
    assert load_script(p) == parse_script(shipped("generate.proto"))


# -- sweeps -------------------------------------------------------------------------

def test_adiabatic_sweep_rows_and_csv():
    template = shipped("adiabatic.sweep.proto")
    rows = sweep(template, "ratio", ["1e2", "1e3"], workers=1)
    assert [r["ratio"] for r in rows] == ["1e2", "1e3"]
    assert rows[0]["infidelity"] > rows[1]["infidelity"]
    text = rows_to_csv(rows, "ratio")
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert list(parsed[0])[: 1 + len(SWEEP_COLUMNS)] == ["ratio", *SWEEP_COLUMNS]
    assert float(parsed[1]["infidelity"]) == rows[1]["infidelity"]


def test_sweep_in_parallel_matches_serial():
    template = shipped("presets.sweep.proto")
    serial = sweep(template, "preset", ["rb85", "he4"], workers=1)
    parallel = sweep(template, "preset", ["rb85", "he4"], workers=2)
    assert rows_to_csv(serial, "preset") == rows_to_csv(parallel, "preset")


def test_sweep_errors():
    with pytest.raises(ValueError):
        sweep("params $x\n", "x", [])
    with pytest.raises(ValueError):
        sweep("params rb85\n", "x", ["1"])
    assert parse_grid(" 1e2, 1e3 ,,") == ["1e2", "1e3"]
