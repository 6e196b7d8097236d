"""Photon-mode optics: the symmetric beam splitter and photon counting."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

from ..statekit import (
    PRUNE,
    KetState,
    Projection,
    StateError,
    fock_mode,
    project_where,
)
from .propagators import SQRT1_2, UnsupportedSectorError

# a2 = (a0 + i a1)/sqrt2, a3 = (i a0 + a1)/sqrt2, applied to single photons
_SPLIT = {
    (0, 0): [((0, 0), 1.0)],
    (1, 0): [((1, 0), SQRT1_2), ((0, 1), 1j * SQRT1_2)],
    (0, 1): [((1, 0), 1j * SQRT1_2), ((0, 1), SQRT1_2)],
}


def beam_splitter(state: KetState, in0: str, in1: str, out2: str, out3: str) -> KetState:
    """Mix two modes on a symmetric splitter; inputs leave the registry.

    Only the sector with at most one photon across the inputs is supported.
    Output modes are created in vacuum when absent.
    """
    p0, p1 = state.position(in0), state.position(in1)
    reg = list(state.registry)
    outs = []
    for o in (out2, out3):
        if state.has(o):
            po = state.position(o)
            if any(c[po] != "0" for c in state.amplitudes):
                raise StateError(f"output mode {o!r} is not in vacuum")
            outs.append(po)
        else:
            reg.append(fock_mode(o, 1, kind="detector-mode"))
            outs.append(len(reg) - 1)
    new_len = len(reg)
    amps: dict = {}
    for config, amp in state.amplitudes.items():
        n = (int(config[p0]), int(config[p1]))
        if n not in _SPLIT:
            raise UnsupportedSectorError(f"input photon numbers {n} exceed the single-photon sector")
        base = list(config) + ["0"] * (new_len - len(config))
        for (m2, m3), coeff in _SPLIT[n]:
            base[outs[0]], base[outs[1]] = str(m2), str(m3)
            key = tuple(base)
            amps[key] = amps.get(key, 0j) + coeff * amp
    keep = [i for i in range(new_len) if i not in (p0, p1)]
    amps = {tuple(c[i] for i in keep): a for c, a in amps.items()}
    amps = {c: a for c, a in amps.items() if abs(a) >= PRUNE}
    return KetState(tuple(reg[i] for i in keep), amps, state.norm_tag, state.probability)


def postselect_photon_number(state: KetState, modes: Sequence[str], total: int) -> Projection:
    """Keep the sector with exactly ``total`` photons summed over ``modes``."""
    pos = [state.position(m) for m in modes]
    return project_where(state, lambda c: sum(int(c[p]) for p in pos) == total)


@dataclass(frozen=True)
class DetectionOutcome:
    counts: tuple
    probability: float
    state: KetState
    failure: bool

    def label(self) -> str:
        return ",".join(f"{m}={n}" for m, n in self.counts)


def detect_photons(state: KetState, modes: Sequence[str]) -> list:
    """Enumerate populated photon-count outcomes on ``modes``.

    Outcomes whose total count differs from one are flagged as failures.
    Conditional states have the measured modes removed.
    """
    pos = [state.position(m) for m in modes]
    specs = [state.registry[p] for p in pos]
    keep = [i for i in range(len(state.registry)) if i not in pos]
    total = state.norm_sq()
    results = []
    for labels in itertools.product(*(s.basis for s in specs)):
        branch = {c: a for c, a in state.amplitudes.items() if all(c[p] == l for p, l in zip(pos, labels))}
        if not branch:
            continue
        w = math.fsum(abs(a) ** 2 for a in branch.values())
        s = 1.0 / math.sqrt(w)
        p = w / total
        reduced = {tuple(c[i] for i in keep): a * s for c, a in branch.items()}
        cond = KetState(tuple(state.registry[i] for i in keep), reduced, "post-selected", p)
        counts = tuple((m, int(l)) for m, l in zip(modes, labels))
        results.append(DetectionOutcome(counts, p, cond, sum(n for _, n in counts) != 1))
    return results
