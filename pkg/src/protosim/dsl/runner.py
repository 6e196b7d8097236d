"""Execute a parsed protocol script and assemble a deterministic report."""
from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import metrics
from ..dynamics import (
    PulseSpec,
    beam_splitter,
    bragg_closed_form,
    bragg_routed,
    cavity_phase,
    classical_pulse,
    compare_closed_form,
    detect_photons,
    jc_resonant,
    momentum_hadamard,
    postselect_photon_number,
    ramsey_zone,
)
from ..params import ParamPreset, apply_overrides, load_preset_file, preset, preset_names, validate_bragg_regime
from ..protocols import atom_state, cavity_superposition, serialize_state
from ..statekit import (
    KetState,
    StateError,
    atom_internal,
    drop_product_subsystem,
    fock_mode,
    from_dict,
    make_state,
    project_and_collapse,
    tensor,
)
from .parser import ProtocolScript, eval_number

PART_SUFFIX = {"int": ".int", "mom": ".mom"}


class StepError(RuntimeError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


@dataclass
class RunReport:
    script_hash: str
    params: dict
    steps: list = field(default_factory=list)
    outcome_tables: list = field(default_factory=list)
    oracle: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    expects: list = field(default_factory=list)
    final_state: KetState | None = None
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return all(e["passed"] for e in self.expects)

    def to_dict(self) -> dict:
        # wall time is left out so repeated runs serialize identically
        return {
            "script_hash": self.script_hash,
            "params": self.params,
            "steps": self.steps,
            "outcome_tables": self.outcome_tables,
            "oracle": self.oracle,
            "metrics": self.metrics,
            "expects": self.expects,
            "passed": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def resolve_params(source: str, overrides=(), base_dir: Path | None = None) -> ParamPreset:
    if source in preset_names():
        base = preset(source)
    else:
        path = Path(source)
        if base_dir is not None and not path.is_absolute() and not path.exists():
            path = base_dir / path
        if path.is_file():
            base = load_preset_file(path)
        else:
            base = preset(source)
    return apply_overrides(base, dict(overrides)) if overrides else base


class Runner:
    def __init__(self, script: ProtocolScript, params: ParamPreset | None = None, trace: bool = False,
                 base_dir=None, seed: int | None = None):
        self.script = script
        self.fixed_params = params
        self.preset = params or preset("rb85")
        self.trace = trace
        self.base_dir = Path(base_dir) if base_dir is not None else None
        self.rng = np.random.default_rng(seed) if seed is not None else None
        self.state: KetState | None = None
        self.atoms: set = set()
        self.aux: set = set()

    @property
    def params(self):
        return self.preset.params

    def _join(self, part: KetState):
        self.state = part if self.state is None else tensor(self.state, part)

    def _need_state(self, line):
        if self.state is None:
            raise StepError("no state has been prepared yet", line)
        return self.state

    def _duration(self, text: str, auto: float) -> float:
        return auto if text == "auto" else eval_number(text)

    def _ids(self, names) -> list:
        out = []
        for n in names:
            if n in self.atoms:
                out += [n + ".int", n + ".mom"]
            else:
                out.append(n)
        return out

    def run(self) -> RunReport:
        h = hashlib.sha256(self.script.source.encode("utf-8")).hexdigest()
        report = RunReport(h, {})
        for step in self.script.steps:
            try:
                prob = getattr(self, "_" + step.keyword.replace("-", "_"))(dict(step.args), step.line, report)
            except StepError:
                raise
            except (StateError, ValueError, KeyError, ArithmeticError) as exc:
                raise StepError(f"{step.keyword}: {exc}", step.line) from exc
            entry = {"line": step.line, "step": step.to_line(), "probability": prob}
            if self.trace and self.state is not None:
                entry["state"] = serialize_state(self.state)
            report.steps.append(entry)
        report.params = {"name": self.preset.name, **self.params.to_dict()}
        report.final_state = self.state
        if self.state is not None and not self.state.is_zero:
            report.metrics["final_state"] = serialize_state(self.state)
        return report

    # -- steps ---------------------------------------------------------------
    def _params(self, a, line, report):
        if self.fixed_params is None:
            self.preset = resolve_params(a["source"], a["overrides"], self.base_dir)
        report.metrics["regime"] = validate_bragg_regime(self.params, self.preset.cavity_lifetime)

    def _cavity(self, a, line, report):
        if a["initial"] == "superposition":
            part = cavity_superposition(a["id"])
        else:
            part = make_state([fock_mode(a["id"], 1)], [((a["initial"],), 1.0)])
        self._join(part)

    def _atom(self, a, line, report):
        self._join(atom_state(a["id"], a["internal"], a["momentum"]))
        self.atoms.add(a["id"])

    def _bragg(self, a, line, report):
        s = self._need_state(line)
        t = self._duration(a["duration"], self.params.bragg_time)
        ai, am = a["atom"] + ".int", a["atom"] + ".mom"
        if a["routes"]:
            self.state = bragg_routed(s, ai, am, dict(a["routes"]), self.params, t)
        else:
            self.state = bragg_closed_form(s, ai, am, a["cavity"], self.params, t)

    def _pulse(self, a, line, report):
        arm = None if a["arm"] == "*" else a["arm"]
        spec = PulseSpec(eval_number(a["theta"]), eval_number(a["phi"]), arm, a["convention"])
        self.state = classical_pulse(self._need_state(line), a["atom"] + ".int", a["atom"] + ".mom", spec)

    def _ramsey(self, a, line, report):
        target = a["target"] + ".int" if a["target"] in self.atoms else a["target"]
        self.state = ramsey_zone(self._need_state(line), target)

    def _hadamard_momentum(self, a, line, report):
        self.state = momentum_hadamard(self._need_state(line), a["atom"] + ".mom")

    def _phase(self, a, line, report):
        self.state = cavity_phase(self._need_state(line), a["cavity"], eval_number(a["angle"]))

    def _aux(self, a, line, report):
        x, cav = a["id"], a["cavity"]
        s = tensor(self._need_state(line), make_state([atom_internal(x)], [(("g",), 1.0)]))
        s = jc_resonant(s, x, cav, self.params, self._duration(a["duration"], self.params.jc_time))
        s = ramsey_zone(s, x)
        proj = project_and_collapse(s, {x: a["outcome"]})
        if proj.impossible:
            raise StepError(f"auxiliary outcome {a['outcome']} has zero probability", line)
        s = drop_product_subsystem(proj.state, x)
        try:
            s = drop_product_subsystem(s, cav)
        except StateError:
            raise StepError(f"cavity {cav} is still entangled after the readout; use duration auto", line) from None
        self.state = s
        return proj.probability

    def _splitter(self, a, line, report):
        self.state = beam_splitter(self._need_state(line), a["in0"], a["in1"], a["out2"], a["out3"])

    def _detect(self, a, line, report):
        s = self._need_state(line)
        modes, mode = list(a["modes"]), a["mode"]
        if mode.startswith("total="):
            proj = postselect_photon_number(s, modes, int(mode[6:]))
            if proj.impossible:
                raise StepError(f"no amplitude with {mode}", line)
            self.state = proj.state
            return proj.probability
        if mode == "enumerate":
            rows = [{"outcome": o.label(), "probability": o.probability, "failure": o.failure,
                     "state": serialize_state(o.state)} for o in detect_photons(s, modes)]
            report.outcome_tables.append({"line": line, "rows": rows})
            return None
        counts = mode.split(",")
        proj = project_and_collapse(s, dict(zip(modes, counts)))
        if proj.impossible:
            raise StepError(f"photon counts {mode} have zero probability", line)
        out = proj.state
        for m in modes:
            out = drop_product_subsystem(out, m)
        self.state = out
        return proj.probability

    def _measure(self, a, line, report):
        s = self._need_state(line)
        ids = [at + PART_SUFFIX[p] for at in a["atoms"] for p in a["parts"]]
        entropy_side = None
        if a["entropy"]:
            left = a["entropy"].split("|")[0]
            entropy_side = self._ids([x for x in left.split(",") if x])
        if a["outcome"] in ("enumerate", "sample"):
            rows = []
            for labels in itertools.product(*(s.spec(i).basis for i in ids)):
                proj = project_and_collapse(s, dict(zip(ids, labels)))
                row = {"outcome": dict(zip(ids, labels)), "probability": proj.probability}
                if not proj.impossible:
                    cond = proj.state
                    for i in ids:
                        cond = drop_product_subsystem(cond, i)
                    if entropy_side:
                        row["entropy"] = metrics.entanglement_entropy(cond, entropy_side)
                    row["state"] = serialize_state(cond)
                    row["_cond"] = cond
                rows.append(row)
            if a["outcome"] == "sample":
                if self.rng is None:
                    raise StepError("sampling needs an explicit --seed", line)
                p = np.array([r["probability"] for r in rows])
                pick = rows[int(self.rng.choice(len(rows), p=p / p.sum()))]
                self.state = pick["_cond"]
                self.atoms.difference_update(a["atoms"])
                for r in rows:
                    r.pop("_cond", None)
                report.outcome_tables.append({"line": line, "rows": rows, "sampled": pick["outcome"]})
                return pick["probability"]
            for r in rows:
                r.pop("_cond", None)
            report.outcome_tables.append({"line": line, "rows": rows})
            return None
        labels = a["outcome"].split(",")
        proj = project_and_collapse(s, dict(zip(ids, labels)))
        if proj.impossible:
            raise StepError(f"outcome {a['outcome']} has zero probability", line)
        out = proj.state
        for i in ids:
            out = drop_product_subsystem(out, i)
        self.state = out
        if set(a["parts"]) == {"int", "mom"}:
            self.atoms.difference_update(a["atoms"])
        if entropy_side:
            report.metrics[f"entropy@{line}"] = metrics.entanglement_entropy(out, entropy_side)
        return proj.probability

    def _drop(self, a, line, report):
        s = self._need_state(line)
        for i in self._ids([a["id"]]):
            s = drop_product_subsystem(s, i)
        self.atoms.discard(a["id"])
        self.state = s

    def _oracle(self, a, line, report):
        o = dict(a["options"])
        row = compare_closed_form(
            self.params,
            beta_t=eval_number(o.get("beta_t", "pi/2")),
            branch=o.get("branch", "ground"),
            l_max=int(eval_number(o.get("lmax", "6"))),
            tol=eval_number(o.get("tol", "1e-8")),
        )
        row["status"] = validate_bragg_regime(self.params)["status"]
        row["line"] = line
        report.oracle.append(row)

    def _expect_fidelity(self, a, line, report):
        s = self._need_state(line)
        target = a["target"]
        if target.startswith("@"):
            path = Path(target[1:])
            if self.base_dir is not None and not path.is_absolute():
                path = self.base_dir / path
            obj = json.loads(path.read_text(encoding="utf-8"))
        else:
            obj = json.loads(target)
        lit = from_dict(obj, registry=None if "registry" in obj else s.registry)
        ov = metrics.fidelity(s, lit)
        thr = eval_number(a["threshold"])
        report.expects.append({"line": line, "kind": "fidelity", "value": ov.fidelity, "phase": ov.phase,
                               "threshold": thr, "passed": bool(ov.fidelity >= thr)})

    def _expect_entropy(self, a, line, report):
        s = self._need_state(line)
        left = a["bipartition"].split("|")[0]
        value = metrics.entanglement_entropy(s, self._ids([x for x in left.split(",") if x]))
        want, tol = eval_number(a["value"]), eval_number(a["tol"])
        report.expects.append({"line": line, "kind": "entropy", "value": value, "target": want, "tol": tol,
                               "passed": bool(abs(value - want) <= tol)})


def run_script(script: ProtocolScript, params: ParamPreset | None = None, trace: bool = False,
               base_dir=None, seed: int | None = None) -> RunReport:
    import time

    t0 = time.perf_counter()
    report = Runner(script, params, trace, base_dir, seed).run()
    report.wall_time = time.perf_counter() - t0
    return report
