"""Atom-field propagators acting on sparse states."""
from __future__ import annotations

import cmath
import math
import re
import warnings
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..params import PhysicalParams, RegimeError
from ..statekit import (
    KetState,
    StateError,
    apply_local_unitary,
    component,
    superpose,
    map_configs,
)

SQRT1_2 = 1.0 / math.sqrt(2.0)

# phase of the positive-sign pulse that sends |g> -> |e>, |e> -> -|g> at theta = pi
FLIP_PHI = -math.pi / 2

BRAGG_WARN_RATIO = 10.0
BRAGG_FAIL_RATIO = 2.0

_MOMENTUM = re.compile(r"^P(-?\d+)$")


class UnsupportedSectorError(StateError):
    """A populated configuration lies outside the single-excitation model."""


class RegimeWarning(UserWarning):
    pass


def momentum_order(label: str) -> int:
    m = _MOMENTUM.match(label)
    if not m:
        raise StateError(f"momentum label {label!r} is not of the form P<int>")
    return int(m.group(1))


def check_bragg_regime(params: PhysicalParams) -> float:
    ratio = params.ratio
    if ratio < BRAGG_FAIL_RATIO:
        raise RegimeError(f"Delta/omega_r = {ratio:.3g} is outside the Bragg regime")
    if ratio < BRAGG_WARN_RATIO:
        warnings.warn(f"Delta/omega_r = {ratio:.3g} is marginal for Bragg diffraction", RegimeWarning, stacklevel=3)
    return ratio


def bragg_rotation(beta_t: float) -> np.ndarray:
    """Adiabatic two-level propagator on (P0, P-2), including the e^{2i beta t} phase."""
    c, s = math.cos(beta_t), math.sin(beta_t)
    return cmath.exp(2j * beta_t) * np.array([[c, 1j * s], [1j * s, c]])


def _require_labels(state: KetState, mom: str, labels=("P0", "P-2")):
    basis = state.spec(mom).basis
    missing = [l for l in labels if l not in basis]
    if missing:
        raise StateError(f"momentum subsystem {mom!r} lacks {missing}")


def bragg_closed_form(
    state: KetState,
    internal: str,
    momentum: str,
    cavity: str,
    params: PhysicalParams,
    duration: float,
) -> KetState:
    """First-order off-resonant Bragg scattering of one atom by one cavity mode.

    The (g, n=1) and (e, n=0) sectors rotate P0 <-> P-2 with the adiabatic
    propagator; (g, 0) and (e, 1) only pick up the kinetic phase, which is
    zero for P0 and P-2.
    """
    _require_labels(state, momentum)
    check_bragg_regime(params)
    pi, pm, pc = state.position(internal), state.position(momentum), state.position(cavity)
    bt = params.beta * duration
    R = bragg_rotation(bt)
    wr_t = params.omega_r * duration
    l0 = params.l0
    pair = {"P0": 0, "P-2": 1}
    names = ("P0", "P-2")

    def kinetic(label: str) -> complex:
        l = momentum_order(label)
        return cmath.exp(-1j * l * (l0 + l) * wr_t) if l not in (0, -2) else 1.0

    def image(config):
        x, p, n = config[pi], config[pm], int(config[pc])
        interacting = (x == "g" and n == 1) or (x == "e" and n == 0)
        if n >= 2:
            raise UnsupportedSectorError(f"photon number {n} with atom in {x!r} is outside the model")
        if not interacting or p not in pair:
            yield config, kinetic(p)
            return
        j = pair[p]
        for i, lab in enumerate(names):
            new = list(config)
            new[pm] = lab
            yield tuple(new), R[i, j]

    return map_configs(state, image)


def bragg_routed(
    state: KetState,
    internal: str,
    momentum: str,
    routes: Mapping[str, str],
    params: PhysicalParams,
    duration: float,
) -> KetState:
    """Send each momentum arm through its own cavity.

    ``routes`` maps an incoming momentum label to a cavity id.  Arms are
    selected on the momentum held *before* the interaction.  The combined map
    must be an isometry on the populated configurations; arm collisions raise.
    """
    parts = []
    covered = set()
    for arm, cav in routes.items():
        piece = component(state, {momentum: arm})
        covered.add(arm)
        if piece.is_zero:
            continue
        parts.append(bragg_closed_form(piece, internal, momentum, cav, params, duration))
    pm = state.position(momentum)
    rest = {c: a for c, a in state.amplitudes.items() if c[pm] not in covered}
    if rest:
        parts.append(KetState(state.registry, rest, "unnormalized"))
    if not parts:
        return state
    out = superpose(*parts)
    if abs(out.norm_sq() - state.norm_sq()) > 1e-10:
        raise StateError("routed arms collide after diffraction; the map is not an isometry on this state")
    return KetState(out.registry, out.amplitudes, state.norm_tag, state.probability)


def jc_resonant(
    state: KetState,
    internal: str,
    cavity: str,
    params: PhysicalParams,
    duration: float,
) -> KetState:
    """Resonant single-excitation exchange |g,1> <-> |e,0> at rate mu."""
    pi, pc = state.position(internal), state.position(cavity)
    c, s = math.cos(params.mu * duration), math.sin(params.mu * duration)

    def image(config):
        x, n = config[pi], int(config[pc])
        if n >= 2 or (x == "e" and n >= 1):
            raise UnsupportedSectorError(f"|{x},{n}> is outside the single-excitation sector")
        if x == "g" and n == 0:
            yield config, 1.0
            return
        same = config
        other = list(config)
        if x == "g":
            other[pi], other[pc] = "e", "0"
        else:
            other[pi], other[pc] = "g", "1"
        yield same, c
        yield tuple(other), -1j * s

    return map_configs(state, image)


@dataclass(frozen=True)
class PulseSpec:
    """Classical resonant pulse of area ``theta`` on one momentum arm.

    ``convention='negative'`` uses H = -(Omega/2)(sigma+ e^{-i phi} + h.c.),
    so a pi pulse maps g -> i e and e -> i g at phi = 0.
    ``convention='positive'`` uses the opposite sign; with
    ``phi = FLIP_PHI`` a pi pulse maps g -> e and e -> -g.
    ``arm=None`` addresses the whole atom.
    """

    theta: float
    phi: float = 0.0
    arm: str | None = None
    convention: str = "negative"

    def __post_init__(self):
        if self.theta < 0:
            raise ValueError("pulse area must be non-negative")
        if self.convention not in ("positive", "negative"):
            raise ValueError(f"unknown pulse convention {self.convention!r}")


def pulse_matrix(theta: float, phi: float, convention: str) -> np.ndarray:
    # basis (g, e); generator e^{-i phi} |e><g| + e^{i phi} |g><e|
    G = np.array([[0, cmath.exp(1j * phi)], [cmath.exp(-1j * phi), 0]])
    sign = -1j if convention == "positive" else 1j
    return math.cos(theta / 2) * np.eye(2) + sign * math.sin(theta / 2) * G


def classical_pulse(state: KetState, internal: str, momentum: str | None, pulse: PulseSpec) -> KetState:
    if pulse.arm is not None:
        if momentum is None:
            raise StateError("an arm-selective pulse needs the momentum subsystem")
        state.spec(momentum).index(pulse.arm)
    U = pulse_matrix(pulse.theta, pulse.phi, pulse.convention)
    pi = state.position(internal)
    pm = state.position(momentum) if pulse.arm is not None else None
    gi = {"g": 0, "e": 1}
    labels = ("g", "e")

    def image(config):
        if pm is not None and config[pm] != pulse.arm:
            yield config, 1.0
            return
        j = gi[config[pi]]
        for i in range(2):
            if U[i, j] != 0:
                new = list(config)
                new[pi] = labels[i]
                yield tuple(new), U[i, j]

    return map_configs(state, image)


RAMSEY = np.array([[1, 1], [1, -1]]) * SQRT1_2


def ramsey_zone(state: KetState, internal: str) -> KetState:
    """g -> (g+e)/sqrt2, e -> (g-e)/sqrt2."""
    basis = state.spec(internal).basis
    if basis != ("g", "e"):
        raise StateError(f"{internal!r} is not a two-level internal subsystem")
    return apply_local_unitary(state, [internal], RAMSEY)


def momentum_hadamard(state: KetState, momentum: str) -> KetState:
    """P0 -> (P0+P-2)/sqrt2, P-2 -> (P0-P-2)/sqrt2; other momenta untouched."""
    _require_labels(state, momentum)
    spec = state.spec(momentum)
    U = np.eye(spec.dim, dtype=complex)
    a, b = spec.index("P0"), spec.index("P-2")
    U[np.ix_([a, b], [a, b])] = RAMSEY
    return apply_local_unitary(state, [momentum], U)


def cavity_phase(state: KetState, cavity: str, phi: float) -> KetState:
    """Free-evolution phase |n> -> e^{i n phi} |n> on one mode."""
    spec = state.spec(cavity)
    U = np.diag([cmath.exp(1j * int(n) * phi) for n in spec.basis])
    return apply_local_unitary(state, [cavity], U)
