"""Physical parameters, experimental presets and Bragg-regime diagnostics.

Internally every frequency is an angular frequency in rad/s with hbar = 1;
printed values keep their original unit tags and pass through
:func:`to_angular`, the single place where "Hz-like" numbers become rad/s.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping

from scipy.constants import atomic_mass, hbar

__all__ = [
    "PhysicalParams",
    "Quantity",
    "ParamPreset",
    "to_angular",
    "preset",
    "preset_names",
    "load_preset_file",
    "validate_bragg_regime",
    "RegimeError",
]

PRESET_DIR_ENV = "PROTOSIM_PRESET_DIR"


class RegimeError(ValueError):
    pass


@dataclass(frozen=True)
class PhysicalParams:
    """Atom and field parameters (SI; frequencies in rad/s).

    ``omega_r`` and ``beta`` are derived on access, never stored.
    """

    mu: float
    delta: float
    omega: float
    k: float
    mass: float
    l0: int = 2

    def __post_init__(self):
        for name in ("mu", "delta", "omega", "k", "mass"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number, got {v!r}")
        if self.l0 <= 0 or self.l0 % 2:
            raise ValueError("l0 must be a positive even integer")

    @property
    def omega_r(self) -> float:
        return hbar * self.k ** 2 / (2.0 * self.mass)

    @property
    def beta(self) -> float:
        return self.mu ** 2 / (4.0 * self.delta)

    @property
    def bragg_time(self) -> float:
        """Full-transfer interaction time 2*pi*Delta/mu**2 (beta*t = pi/2)."""
        return 2.0 * math.pi * self.delta / self.mu ** 2

    @property
    def jc_time(self) -> float:
        """Complete single-photon swap time pi/(2 mu)."""
        return math.pi / (2.0 * self.mu)

    @property
    def ratio(self) -> float:
        return self.delta / self.omega_r

    def with_ratio(self, delta_over_omega_r: float | None = None, mu_over_omega_r: float | None = None) -> "PhysicalParams":
        """Copy with detuning and/or coupling set relative to the recoil frequency."""
        wr = self.omega_r
        kw = {}
        if delta_over_omega_r is not None:
            kw["delta"] = float(delta_over_omega_r) * wr
        if mu_over_omega_r is not None:
            kw["mu"] = float(mu_over_omega_r) * wr
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return asdict(self)


# -- units ---------------------------------------------------------------------

_SCALE = {"Hz": 1.0, "kHz": 1e3, "KHz": 1e3, "MHz": 1e6, "GHz": 1e9}
_LENGTH = {"m": 1.0, "nm": 1e-9, "um": 1e-6}
_TIME = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9}


@dataclass(frozen=True)
class Quantity:
    """A number with the unit it was printed in.

    For Hz-family units ``cycles`` says whether the printed number counts
    cycles per second (multiply by 2*pi) or is already angular.
    """

    value: float
    unit: str
    cycles: bool = True

    def to_dict(self) -> dict:
        return {"value": self.value, "unit": self.unit, "cycles": self.cycles}

    def __str__(self) -> str:
        if self.unit in _SCALE:
            return f"{self.value!r} {self.unit} {'cycles' if self.cycles else 'angular'}"
        return f"{self.value!r} {self.unit}"


def to_angular(q: Quantity) -> float:
    """Convert a frequency-like quantity to rad/s."""
    if q.unit == "rad/s":
        return float(q.value)
    if q.unit in _SCALE:
        v = q.value * _SCALE[q.unit]
        return v * 2.0 * math.pi if q.cycles else v
    raise ValueError(f"not a frequency unit: {q.unit!r}")


def to_si(q: Quantity) -> float:
    if q.unit in _LENGTH:
        return q.value * _LENGTH[q.unit]
    if q.unit in _TIME:
        return q.value * _TIME[q.unit]
    if q.unit == "amu":
        return q.value * atomic_mass
    if q.unit == "kg":
        return float(q.value)
    return to_angular(q)


# -- presets ---------------------------------------------------------------------

@dataclass(frozen=True)
class ParamPreset:
    name: str
    params: PhysicalParams
    printed: Mapping = field(default_factory=dict)
    notes: Mapping = field(default_factory=dict)
    cavity_lifetime: float | None = None

    @property
    def omega_r_consistency(self) -> float | None:
        """Relative mismatch between printed and k/M-derived recoil frequency."""
        q = self.printed.get("omega_r")
        if q is None:
            return None
        derived = self.params.omega_r
        return abs(to_angular(q) - derived) / derived

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "params": self.params.to_dict(),
            "printed": {k: v.to_dict() for k, v in self.printed.items()},
            "notes": dict(self.notes),
            "cavity_lifetime": self.cavity_lifetime,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping) -> "ParamPreset":
        return cls(
            name=d["name"],
            params=PhysicalParams(**d["params"]),
            printed={k: Quantity(**v) for k, v in d["printed"].items()},
            notes=dict(d["notes"]),
            cavity_lifetime=d["cavity_lifetime"],
        )


def _build_preset(name, printed: dict, notes: dict, lifetime=None, mu=None) -> ParamPreset:
    k = 2.0 * math.pi / to_si(printed["wavelength"])
    mass = to_si(printed["mass"])
    delta = to_angular(printed["delta"])
    if mu is None:
        mu = math.sqrt(4.0 * delta * to_angular(printed["beta"]))
    p = PhysicalParams(mu=mu, delta=delta, omega=to_angular(printed["omega"]), k=k, mass=mass)
    return ParamPreset(name, p, printed, notes, lifetime)


def _rb85() -> ParamPreset:
    printed = {
        "mass": Quantity(85.0, "amu"),
        "wavelength": Quantity(780.0, "nm"),
        "omega_r": Quantity(2.4e4, "rad/s"),
        "omega": Quantity(16.4, "MHz", cycles=True),
        "delta": Quantity(1.0, "GHz", cycles=True),
        "finesse": Quantity(4.4e5, "1"),
    }
    notes = {
        "mu": "coupling not printed; set so that beta = omega_r/10 (first-order Bragg regime)",
        "delta": "1 GHz read as cycles, i.e. 2*pi*1e9 rad/s",
    }
    k = 2.0 * math.pi / to_si(printed["wavelength"])
    omega_r = hbar * k ** 2 / (2.0 * to_si(printed["mass"]))
    mu = math.sqrt(4.0 * to_angular(printed["delta"]) * omega_r / 10.0)
    return _build_preset("rb85", printed, notes, None, mu=mu)


def _he4() -> ParamPreset:
    printed = {
        "mass": Quantity(4.0, "amu"),
        "wavelength": Quantity(543.5, "nm"),
        "omega_r": Quantity(1.06, "MHz", cycles=False),
        "omega": Quantity(120.0, "kHz", cycles=False),
        "delta": Quantity(6.28, "GHz", cycles=False),
        "beta": Quantity(120.0, "kHz", cycles=False),
        "interaction_time": Quantity(13.0, "us"),
        "finesse": Quantity(7.85e6, "1"),
    }
    notes = {
        "units": "frequencies read as angular: this reproduces the printed 13 us interaction time "
                 "and the k/M-derived recoil frequency",
        "omega": "no classical Rabi frequency printed; the effective coupling value is reused",
        "lifetime": "cavity lifetime taken as 1 ms",
        "ambiguous_time": "a 0.5 us figure of unclear role is recorded here and not used",
    }
    return _build_preset("he4", printed, notes, lifetime=1e-3)


_PRESETS = {"rb85": _rb85, "he4": _he4}


def preset_names() -> list:
    return sorted(_PRESETS)


def _preset_dirs() -> list:
    env = os.environ.get(PRESET_DIR_ENV)
    return [Path(p) for p in env.split(os.pathsep)] if env else []


def preset(name: str) -> ParamPreset:
    """Return a built-in preset or one found in ``$PROTOSIM_PRESET_DIR``.

    Files in the preset directory (``<name>.preset``) take precedence.
    """
    for d in _preset_dirs():
        path = d / f"{name}.preset"
        if path.is_file():
            return load_preset_file(path)
    try:
        return _PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; known: {preset_names()}") from None


def parse_quantity(text: str) -> Quantity:
    parts = text.split()
    if not parts:
        raise ValueError("empty value")
    value = float(parts[0])
    unit = parts[1] if len(parts) > 1 else "1"
    cycles = True
    if len(parts) > 2:
        if parts[2] not in ("cycles", "angular"):
            raise ValueError(f"expected 'cycles' or 'angular', got {parts[2]!r}")
        cycles = parts[2] == "cycles"
    return Quantity(value, unit, cycles)


_PARAM_KEYS = ("mu", "delta", "omega", "k", "mass")


def apply_overrides(base: ParamPreset, values: Mapping[str, str], name: str | None = None) -> ParamPreset:
    """Override preset fields from ``key -> text`` pairs.

    Keys are :class:`PhysicalParams` fields (plain SI / rad/s numbers or
    unit-tagged quantities), printed-value names, ``delta_over_omega_r``,
    ``mu_over_omega_r``, ``cavity_lifetime`` or ``name``.
    """
    p = base.params
    printed = dict(base.printed)
    lifetime = base.cavity_lifetime
    ratio_kw = {}
    direct = {}
    for key, text in values.items():
        if key == "name":
            name = text.strip()
        elif key in ("delta_over_omega_r", "mu_over_omega_r"):
            ratio_kw[key] = float(text)
        elif key == "cavity_lifetime":
            lifetime = to_si(parse_quantity(text)) if len(text.split()) > 1 else float(text)
        elif key in _PARAM_KEYS or key == "l0":
            q = parse_quantity(text)
            direct[key] = int(q.value) if key == "l0" else (float(q.value) if q.unit == "1" else to_si(q))
        elif key in ("wavelength",):
            printed[key] = parse_quantity(text)
            direct["k"] = 2.0 * math.pi / to_si(printed[key])
        elif key in ("omega_r", "beta", "interaction_time", "finesse"):
            printed[key] = parse_quantity(text)
            if key == "beta":
                delta = direct.get("delta", p.delta)
                direct["mu"] = math.sqrt(4.0 * delta * to_angular(printed[key]))
        else:
            raise KeyError(f"unknown parameter key {key!r}")
    p = replace(p, **direct)
    if ratio_kw:
        p = p.with_ratio(**ratio_kw)
    return ParamPreset(name or base.name, p, printed, base.notes, lifetime)


def load_preset_file(path) -> ParamPreset:
    """Read a ``key = value`` preset file.

    ``base = <preset>`` (default rb85) names the preset being overridden;
    ``#`` starts a comment.
    """
    path = Path(path)
    values: dict = {}
    base_name = "rb85"
    for n, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key == "base":
            base_name = val
        else:
            values[key] = val
    base = _PRESETS[base_name]() if base_name in _PRESETS else preset(base_name)
    return apply_overrides(base, values, name=values.get("name", path.stem))


# -- diagnostics ---------------------------------------------------------------

WARN_RATIO = 100.0
FAIL_RATIO = 2.0


def regime_status(ratio: float) -> str:
    if ratio < FAIL_RATIO:
        return "fail"
    if ratio < WARN_RATIO:
        return "warn"
    return "ok"


def validate_bragg_regime(params: PhysicalParams, cavity_lifetime: float | None = None) -> dict:
    """Regime report: Delta/omega_r, full-transfer time, lifetime margin and status."""
    ratio = params.ratio
    t = params.bragg_time
    return {
        "delta_over_omega_r": ratio,
        "beta_over_omega_r": params.beta / params.omega_r,
        "interaction_time": t,
        "cavity_lifetime": cavity_lifetime,
        "time_over_lifetime": None if cavity_lifetime is None else t / cavity_lifetime,
        "status": regime_status(ratio),
    }
