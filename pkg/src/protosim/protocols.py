"""End-to-end pipelines: hyperentangled pair generation, swapping,
delayed-choice swapping and the n-atom generalization.

Atom ``a`` owns two subsystems, ``a.int`` (g/e) and ``a.mom`` (P0/P-2).
Every primitive applied is recorded in a :class:`PipelineTrace`.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from . import metrics
from .dynamics import (
    FLIP_PHI,
    PulseSpec,
    beam_splitter,
    bragg_closed_form,
    bragg_routed,
    cavity_phase,
    classical_pulse,
    detect_photons,
    jc_resonant,
    postselect_photon_number,
    ramsey_zone,
)
from .params import PhysicalParams, preset
from .statekit import (
    KetState,
    StateError,
    atom_internal,
    atom_momentum,
    canonical_phase,
    drop_product_subsystem,
    fock_mode,
    make_state,
    project_and_collapse,
    tensor,
)

SQRT1_2 = 1.0 / math.sqrt(2.0)
N_CAP = 16

DYNAMICS = "dynamics"
MEASURE = "measure"
SETUP = "setup"
GENERATION = "generation"


def int_id(atom: str) -> str:
    return f"{atom}.int"


def mom_id(atom: str) -> str:
    return f"{atom}.mom"


def atom_ids(atom: str) -> tuple:
    return int_id(atom), mom_id(atom)


def default_params() -> PhysicalParams:
    return preset("rb85").params


@dataclass(frozen=True)
class TraceStep:
    label: str
    state: KetState
    probability: float | None = None
    targets: tuple = ()
    kind: str = DYNAMICS


@dataclass
class PipelineTrace:
    pipeline: str
    params: PhysicalParams
    steps: list = field(default_factory=list)
    probability: float | None = None
    outcome_table: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    subtraces: dict = field(default_factory=dict)

    def add(self, label: str, state: KetState, probability=None, targets=(), kind=DYNAMICS) -> KetState:
        if any(s.label == label for s in self.steps):
            raise ValueError(f"duplicate step label {label!r}")
        self.steps.append(TraceStep(label, state, probability, tuple(targets), kind))
        return state

    @property
    def result(self) -> KetState:
        return self.steps[-1].state

    def state(self, label: str) -> KetState:
        for s in self.steps:
            if s.label == label:
                return s.state
        raise KeyError(label)

    def labels(self) -> list:
        return [s.label for s in self.steps]


@dataclass(frozen=True)
class DetectionPlan:
    internal: Mapping = field(default_factory=dict)
    momentum: Mapping = field(default_factory=dict)
    aux: Mapping = field(default_factory=dict)
    detector: str | None = None

    def assignment(self) -> dict:
        out = {int_id(a): v for a, v in self.internal.items()}
        out.update({mom_id(a): v for a, v in self.momentum.items()})
        return out

    def label(self) -> str:
        parts = [f"{a}={v}" for a, v in self.internal.items()]
        parts += [f"{a}={v}" for a, v in self.momentum.items()]
        parts += [f"{a}={v}" for a, v in self.aux.items()]
        if self.detector:
            parts.append(self.detector)
        return ",".join(parts)

    def to_dict(self) -> dict:
        return {"internal": dict(self.internal), "momentum": dict(self.momentum),
                "aux": dict(self.aux), "detector": self.detector}


SWAP_DEFAULT_PLAN = DetectionPlan(
    internal={"a2": "g", "a3": "g"},
    momentum={"a2": "P0", "a3": "P-2"},
    aux={"s": "g", "t": "g"},
)


# -- building blocks ----------------------------------------------------------

def atom_state(atom: str, internal: str = "g", momentum: str = "P0") -> KetState:
    reg = [atom_internal(int_id(atom)), atom_momentum(mom_id(atom))]
    return make_state(reg, [((internal, momentum), 1.0)])


def cavity_superposition(cavity: str) -> KetState:
    """(|0> + |1>)/sqrt2."""
    return make_state([fock_mode(cavity, 1)], [(("0",), SQRT1_2), (("1",), SQRT1_2)])


def aux_readout(state: KetState, trace: PipelineTrace, aux: Sequence[str], cavities: Sequence[str],
                params: PhysicalParams, outcomes: Sequence[str]) -> KetState:
    """Resonant auxiliary atoms empty the cavities; Ramsey, detect, discard.

    Each auxiliary atom enters in |g>, spends pi/(2 mu) in its cavity, crosses
    a Ramsey zone and is post-selected on ``outcomes``.  Cavities (now in
    vacuum) and auxiliary atoms are then removed.
    """
    for x, cav in zip(aux, cavities):
        state = tensor(state, make_state([atom_internal(x)], [(("g",), 1.0)]))
        state = trace.add(f"{x} enters {cav}", state, targets=(x,), kind=SETUP)
        state = trace.add(f"{x} resonant {cav}", jc_resonant(state, x, cav, params, params.jc_time), targets=(x, cav))
    for x in aux:
        state = trace.add(f"{x} ramsey", ramsey_zone(state, x), targets=(x,))
    proj = project_and_collapse(state, dict(zip(aux, outcomes)))
    label = "detect " + ",".join(f"{x}={o}" for x, o in zip(aux, outcomes))
    trace.add(label, proj.state, proj.probability, targets=tuple(aux), kind=MEASURE)
    if proj.impossible:
        return proj.state
    state = proj.state
    for i in list(aux) + list(cavities):
        state = drop_product_subsystem(state, i)
    return trace.add("discard " + ",".join(list(aux) + list(cavities)), state, proj.probability,
                     targets=tuple(aux) + tuple(cavities), kind=SETUP)


# -- generation ---------------------------------------------------------------

def generate_hyper_bell_pair(
    params: PhysicalParams | None = None,
    convention: str = "positive",
    aux_outcome: str = "e",
    atoms: Sequence[str] = ("a1", "a2"),
    cavity: str = "C1",
    aux: str = "x1",
) -> PipelineTrace:
    """Two atoms Bragg-diffracted by one cavity in (|0>+|1>)/sqrt2.

    After each atom a pi pulse on its P-2 arm flips g -> e; an auxiliary atom
    then reads the cavity out.  With ``aux_outcome='e'`` the result is
    (|g g P0 P0> - i|e e P-2 P-2>)/sqrt2; ``'g'`` gives the + i partner.
    """
    params = params or default_params()
    if convention not in ("positive", "negative"):
        raise ValueError(f"unknown convention {convention!r}")
    phi = FLIP_PHI if convention == "positive" else 0.0
    pulse = PulseSpec(math.pi, phi, "P-2", convention)
    trace = PipelineTrace("generate", params)
    state = trace.add("prepare", tensor(cavity_superposition(cavity), atom_state(atoms[0])), kind=SETUP)
    for n, a in enumerate(atoms):
        ai, am = atom_ids(a)
        if n:
            state = trace.add(f"{a} enters", tensor(state, atom_state(a)), kind=SETUP)
        state = trace.add(f"{a} bragg", bragg_closed_form(state, ai, am, cavity, params, params.bragg_time),
                          targets=(ai, am, cavity))
        state = trace.add(f"{a} pulse", classical_pulse(state, ai, am, pulse), targets=(ai, am))
    aux_readout(state, trace, [aux], [cavity], params, [aux_outcome])
    if not trace.result.is_zero:
        trace.probability = trace.steps[-1].probability
        trace.metrics["entropy_atom1"] = metrics.entanglement_entropy(trace.result, atom_ids(atoms[0]))
    return trace


# -- entanglement swapping ------------------------------------------------------

def _swap_pre_detection(params: PhysicalParams, aux: Sequence[str]) -> PipelineTrace:
    trace = PipelineTrace("swap", params)
    t12 = generate_hyper_bell_pair(params, atoms=("a1", "a2"), cavity="C1", aux="x1")
    t34 = generate_hyper_bell_pair(params, atoms=("a3", "a4"), cavity="C2", aux="x2")
    trace.subtraces = {"pair12": t12, "pair34": t34}
    trace.add("pair12", t12.result, t12.probability, kind=GENERATION)
    trace.add("pair34", t34.result, t34.probability, kind=GENERATION)
    state = trace.add("pairs", tensor(t12.result, t34.result), kind=SETUP)
    state = tensor(state, cavity_superposition("A"))
    state = trace.add("cavities", tensor(state, cavity_superposition("B")), kind=SETUP)
    routes = {"P0": "A", "P-2": "B"}
    for a in ("a2", "a3"):
        ai, am = atom_ids(a)
        state = trace.add(f"{a} bragg", bragg_routed(state, ai, am, routes, params, params.bragg_time),
                          targets=(ai, am, "A", "B"))
    aux_readout(state, trace, ["s", "t"], ["A", "B"], params, aux)
    return trace


def _finish_swap(trace: PipelineTrace, plan: DetectionPlan) -> KetState:
    state = trace.result
    if state.is_zero:
        return state
    aux_p = trace.steps[-1].probability
    for a in ("a2", "a3"):
        state = trace.add(f"{a} ramsey", ramsey_zone(state, int_id(a)), targets=(int_id(a),))
    proj = project_and_collapse(state, plan.assignment())
    trace.add("detect a2,a3", proj.state, proj.probability,
              targets=tuple(atom_ids("a2") + atom_ids("a3")), kind=MEASURE)
    if proj.impossible:
        trace.probability = 0.0
        return proj.state
    state = proj.state
    for i in atom_ids("a2") + atom_ids("a3"):
        state = drop_product_subsystem(state, i)
    trace.add("discard a2,a3", state, proj.probability, targets=atom_ids("a2") + atom_ids("a3"), kind=SETUP)
    trace.probability = proj.probability
    trace.metrics.update(_pair_metrics(state, "a1", "a4"))
    trace.metrics["aux_probability"] = aux_p
    return state


def _pair_metrics(state: KetState, left: str, right: str) -> dict:
    s = metrics.schmidt_coefficients(state, atom_ids(left))
    return {
        "entropy": metrics.entanglement_entropy(state, atom_ids(left)),
        "negativity": metrics.negativity(state, (atom_ids(left), atom_ids(right))),
        "schmidt": [float(x) for x in s],
    }


def swap_entanglement(params: PhysicalParams | None = None, plan: DetectionPlan = SWAP_DEFAULT_PLAN) -> PipelineTrace:
    """Swap hyperentanglement from pairs (1,2), (3,4) onto (1,4).

    Undeflected arms of atoms 2 and 3 cross cavity A, deflected arms cavity B;
    auxiliary atoms s, t read out A and B; atoms 2 and 3 cross Ramsey zones
    and are detected.  ``trace.probability`` is conditional on the auxiliary
    outcome, whose probability is in ``trace.metrics['aux_probability']``.
    """
    params = params or default_params()
    aux = tuple(plan.aux.get(x, "g") for x in ("s", "t"))
    trace = _swap_pre_detection(params, aux)
    _finish_swap(trace, plan)
    return trace


@dataclass(frozen=True)
class SwapOutcome:
    plan: DetectionPlan
    probability: float
    state: KetState
    entropy: float

    def to_dict(self) -> dict:
        return {"plan": self.plan.to_dict(), "probability": self.probability,
                "entropy": self.entropy, "state": serialize_state(self.state)}


def enumerate_swap_outcomes(params: PhysicalParams | None = None, aux: Sequence[str] = ("g", "g")) -> list:
    """All 16 internal x momentum outcomes on atoms 2 and 3, given ``aux``."""
    params = params or default_params()
    base = _swap_pre_detection(params, tuple(aux))
    state = base.result
    if state.is_zero:
        raise StateError(f"auxiliary outcome {tuple(aux)} has zero probability")
    for a in ("a2", "a3"):
        state = ramsey_zone(state, int_id(a))
    rows = []
    for b2, a3, m2, m3 in itertools.product("ge", "ge", ("P0", "P-2"), ("P0", "P-2")):
        plan = DetectionPlan({"a2": b2, "a3": a3}, {"a2": m2, "a3": m3}, dict(zip("st", aux)))
        proj = project_and_collapse(state, plan.assignment())
        if proj.impossible:
            rows.append(SwapOutcome(plan, 0.0, proj.state, 0.0))
            continue
        cond = proj.state
        for i in atom_ids("a2") + atom_ids("a3"):
            cond = drop_product_subsystem(cond, i)
        rows.append(SwapOutcome(plan, proj.probability, cond, metrics.entanglement_entropy(cond, atom_ids("a1"))))
    return rows


# -- delayed choice -----------------------------------------------------------

def cavity_group(params: PhysicalParams, atoms: Sequence[str], cavity: str, trace: PipelineTrace | None = None,
                 compensate_phase: bool = True) -> KetState:
    """Atoms in |g,P0> Bragg-diffracted in turn by one cavity, no pulses.

    Each diffraction on the |1> branch contributes -i; with
    ``compensate_phase`` the cavity's free phase i^m (m atoms) is absorbed so
    the group reads (|0> P0...P0 + |1> P-2...P-2)/sqrt2.
    """
    state = cavity_superposition(cavity)
    for a in atoms:
        ai, am = atom_ids(a)
        state = tensor(state, atom_state(a))
        state = bragg_closed_form(state, ai, am, cavity, params, params.bragg_time)
        if trace is not None:
            trace.add(f"{a} bragg {cavity}", state, targets=(ai, am, cavity))
    if compensate_phase:
        state = cavity_phase(state, cavity, math.pi / 2 * len(atoms))
        if trace is not None:
            trace.add(f"{cavity} phase", state, targets=(cavity,))
    return state


def _check_n(n: int, cap: int):
    if n < 4 or n % 2:
        raise ValueError(f"n must be even and at least 4, got {n}")
    if n > cap:
        raise ValueError(f"n = {n} exceeds the cap of {cap} atoms")


def npartite_generate(params: PhysicalParams | None = None, n: int = 4, cap: int = N_CAP,
                      compensate_phase: bool = True) -> tuple:
    """Groups a1..a(n/2) on cavity C1 and a(n/2+1)..an on C2."""
    params = params or default_params()
    _check_n(n, cap)
    first = [f"a{i}" for i in range(1, n // 2 + 1)]
    second = [f"a{i}" for i in range(n // 2 + 1, n + 1)]
    return (cavity_group(params, first, "C1", compensate_phase=compensate_phase),
            cavity_group(params, second, "C2", compensate_phase=compensate_phase))


def _delayed_trace(params: PhysicalParams, n: int, detector: str, cap: int, compensate_phase: bool,
                   name: str) -> PipelineTrace:
    if detector not in ("D1", "D2"):
        raise ValueError(f"detector must be D1 or D2, got {detector!r}")
    _check_n(n, cap)
    trace = PipelineTrace(name, params)
    first = [f"a{i}" for i in range(1, n // 2 + 1)]
    second = [f"a{i}" for i in range(n // 2 + 1, n + 1)]
    g1 = cavity_group(params, first, "C1", trace, compensate_phase)
    g2 = cavity_group(params, second, "C2", trace, compensate_phase)
    state = trace.add("tensor", tensor(g1, g2), kind=SETUP)
    proj = postselect_photon_number(state, ["C1", "C2"], 1)
    state = trace.add("one photon", proj.state, proj.probability, targets=("C1", "C2"), kind=MEASURE)
    state = trace.add("beam splitter", beam_splitter(state, "C2", "C1", "D1", "D2"), targets=("C1", "C2", "D1", "D2"))
    outcomes = detect_photons(state, ["D1", "D2"])
    trace.outcome_table = [{"outcome": "failure (0 or 2 photons)", "probability": 1.0 - proj.probability,
                            "failure": True}]
    chosen = None
    for o in outcomes:
        name_ = "D1" if o.counts == (("D1", 1), ("D2", 0)) else "D2" if o.counts == (("D1", 0), ("D2", 1)) else o.label()
        trace.outcome_table.append({"outcome": name_, "probability": proj.probability * o.probability,
                                    "failure": o.failure, "state": serialize_state(o.state)})
        if name_ == detector:
            chosen = o
    if chosen is None:
        raise StateError(f"detector {detector} never clicks")
    trace.add(f"detect {detector}", chosen.state, chosen.probability, targets=("D1", "D2"), kind=MEASURE)
    trace.probability = proj.probability
    trace.metrics["success_probability"] = proj.probability
    trace.metrics["detector_probability"] = proj.probability * chosen.probability
    trace.metrics["entropy_halves"] = metrics.entanglement_entropy(
        chosen.state, [i for a in first for i in atom_ids(a)])
    return trace


def delayed_choice_swap(params: PhysicalParams | None = None, detector: str = "D1",
                        compensate_phase: bool = True) -> PipelineTrace:
    """Atoms 1,2 on cavity C1 and 3,4 on C2; cavities meet on a beam splitter.

    Only the one-photon sector (probability 1/2) enters the splitter; the
    conditional four-atom momentum state for ``detector`` is the result.
    """
    return _delayed_trace(params or default_params(), 4, detector, 4, compensate_phase, "delayed")


def npartite_swap(params: PhysicalParams | None = None, n: int = 4, detector: str = "D1",
                  cap: int = N_CAP, compensate_phase: bool = True) -> KetState:
    return npartite_trace(params, n, detector, cap, compensate_phase).result


def npartite_trace(params: PhysicalParams | None = None, n: int = 4, detector: str = "D1",
                   cap: int = N_CAP, compensate_phase: bool = True) -> PipelineTrace:
    return _delayed_trace(params or default_params(), n, detector, cap, compensate_phase, "npartite")


def delayed_choice_hyper(state: KetState, arms: Mapping[str, str]) -> KetState:
    """pi pulses (negative-sign convention) on one chosen momentum arm per atom."""
    pulse_for = {a: PulseSpec(math.pi, 0.0, arm, "negative") for a, arm in arms.items()}
    for a, p in pulse_for.items():
        ai, am = atom_ids(a)
        state = classical_pulse(state, ai, am, p)
    return state


def hyper_arms(n: int) -> dict:
    """P0 on the first half of the atoms, P-2 on the second."""
    return {f"a{i}": ("P0" if i <= n // 2 else "P-2") for i in range(1, n + 1)}


# -- reports ------------------------------------------------------------------

def serialize_state(state: KetState) -> dict:
    """JSON form with the first amplitude rotated to real positive."""
    rotated, _ = canonical_phase(state)
    return rotated.to_dict()


def report(trace: PipelineTrace, snapshots: bool = True) -> dict:
    steps = []
    for s in trace.steps:
        d = {"label": s.label, "kind": s.kind, "targets": list(s.targets), "probability": s.probability}
        if snapshots:
            d["state"] = serialize_state(s.state)
        steps.append(d)
    return {
        "pipeline": trace.pipeline,
        "params": trace.params.to_dict(),
        "steps": steps,
        "outcome_table": trace.outcome_table,
        "metrics": trace.metrics,
    }
