import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from protosim.params import (
    PRESET_DIR_ENV,
    ParamPreset,
    PhysicalParams,
    Quantity,
    apply_overrides,
    load_preset_file,
    parse_quantity,
    preset,
    preset_names,
    regime_status,
    to_angular,
    to_si,
    validate_bragg_regime,
)


def test_preset_names():
    assert preset_names() == ["he4", "rb85"]
    with pytest.raises(KeyError):
        preset("cs133")


def test_rb85_printed_values():
    pr = preset("rb85")
    assert pr.printed["omega_r"].value == 2.4e4
    assert pr.printed["mass"] == Quantity(85.0, "amu")
    assert pr.printed["wavelength"] == Quantity(780.0, "nm")
    assert pr.printed["finesse"].value == 4.4e5
    assert pr.params.omega == pytest.approx(2 * math.pi * 16.4e6)
    assert pr.params.delta == pytest.approx(2 * math.pi * 1e9)


def test_rb85_recoil_consistent_within_one_percent():
    pr = preset("rb85")
    # relative to the k/M-derived value; the printed 2.4e4 sits 0.99% below it
    derived = pr.params.omega_r
    assert abs(derived - 2.4e4) / derived < 0.01
    assert pr.omega_r_consistency == pytest.approx(abs(derived - 2.4e4) / derived)


def test_bragg_time_gives_quarter_turn():
    for name in preset_names():
        p = preset(name).params
        assert p.beta * p.bragg_time == pytest.approx(math.pi / 2, rel=1e-15)
        assert p.mu * p.jc_time == pytest.approx(math.pi / 2, rel=1e-15)


def test_he4_effective_rabi_and_interaction_time():
    pr = preset("he4")
    assert pr.params.beta == pytest.approx(120e3, rel=1e-12)
    # derived from mu = sqrt(4 Delta beta): t = pi / (2 beta), cross-checked against 13 us
    assert pr.params.bragg_time == pytest.approx(math.pi / (2 * 120e3))
    assert pr.params.bragg_time == pytest.approx(13e-6, rel=0.01)
    assert pr.printed["interaction_time"] == Quantity(13.0, "us")
    assert pr.printed["finesse"].value == 7.85e6
    assert pr.params.omega_r == pytest.approx(1.06e6, rel=0.01)


def test_validate_regime():
    rb = validate_bragg_regime(preset("rb85").params)
    assert rb["status"] == "ok" and rb["delta_over_omega_r"] > 1e5
    he_pr = preset("he4")
    he = validate_bragg_regime(he_pr.params, he_pr.cavity_lifetime)
    assert he["status"] == "ok"
    assert he["interaction_time"] == pytest.approx(he_pr.params.bragg_time)
    assert he["time_over_lifetime"] < 1
    p = preset("rb85").params
    assert validate_bragg_regime(p.with_ratio(delta_over_omega_r=1.0))["status"] == "fail"
    assert validate_bragg_regime(p.with_ratio(delta_over_omega_r=50.0))["status"] == "warn"


@given(st.floats(0.01, 1e8), st.floats(0.01, 1e8))
def test_status_monotone_in_ratio(a, b):
    rank = {"fail": 0, "warn": 1, "ok": 2}
    lo, hi = sorted((a, b))
    assert rank[regime_status(lo)] <= rank[regime_status(hi)]


def test_preset_serialization_roundtrip():
    for name in preset_names():
        pr = preset(name)
        back = ParamPreset.from_dict(pr.to_dict())
        assert back == pr
        assert back.to_json() == pr.to_json()
        assert back.params.mu == pr.params.mu  # bit-exact


def test_params_validation():
    with pytest.raises(ValueError):
        PhysicalParams(mu=-1, delta=1, omega=1, k=1, mass=1)
    with pytest.raises(ValueError):
        PhysicalParams(mu=1, delta=1, omega=1, k=1, mass=1, l0=3)


def test_units():
    assert to_angular(Quantity(1.0, "GHz")) == pytest.approx(2 * math.pi * 1e9)
    assert to_angular(Quantity(1.0, "GHz", cycles=False)) == 1e9
    assert to_si(Quantity(780.0, "nm")) == pytest.approx(7.8e-7)
    assert to_si(Quantity(13.0, "us")) == pytest.approx(1.3e-5)
    with pytest.raises(ValueError):
        to_angular(Quantity(1.0, "nm"))
    assert parse_quantity("6.28 GHz angular") == Quantity(6.28, "GHz", False)
    assert parse_quantity("2.5") == Quantity(2.5, "1")
    with pytest.raises(ValueError):
        parse_quantity("1 GHz sideways")


def test_overrides():
    base = preset("rb85")
    p = apply_overrides(base, {"delta_over_omega_r": "1000", "mu_over_omega_r": "10"}).params
    assert p.ratio == pytest.approx(1000)
    assert p.mu == pytest.approx(10 * p.omega_r)
    q = apply_overrides(base, {"delta": "2 GHz", "wavelength": "800 nm", "name": "x"})
    assert q.name == "x"
    assert q.params.delta == pytest.approx(2 * math.pi * 2e9)
    assert q.params.k == pytest.approx(2 * math.pi / 8e-7)
    with pytest.raises(KeyError):
        apply_overrides(base, {"colour": "blue"})


def test_preset_file_and_env_dir(tmp_path, monkeypatch):
    f = tmp_path / "slow.preset"
    f.write_text("# detuned further\nbase = rb85\ndelta = 5 GHz\ncavity_lifetime = 2 ms\n")
    pr = load_preset_file(f)
    assert pr.name == "slow"
    assert pr.params.delta == pytest.approx(2 * math.pi * 5e9)
    assert pr.cavity_lifetime == pytest.approx(2e-3)
    monkeypatch.setenv(PRESET_DIR_ENV, str(tmp_path))
    assert preset("slow").params.delta == pr.params.delta
    (tmp_path / "bad.preset").write_text("delta 5\n")
    with pytest.raises(ValueError):
        preset("bad")
