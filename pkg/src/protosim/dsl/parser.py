"""Line-oriented protocol scripts.

One step per line, ``#`` starts a comment.  Tokens are shell-split, so
override values with spaces can be quoted.  ``expect fidelity`` takes an
inline JSON state literal (or ``@file``) followed by a threshold.
"""
from __future__ import annotations

import ast
import json
import math
import operator
import shlex
from dataclasses import dataclass, field
from pathlib import Path

from ..params import PRESET_DIR_ENV, preset_names


def _known_presets() -> set:
    import os

    names = set(preset_names())
    for d in filter(None, os.environ.get(PRESET_DIR_ENV, "").split(os.pathsep)):
        names.update(p.stem for p in Path(d).glob("*.preset"))
    return names


class ScriptError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f"line {line}" + (f", column {column}" if column else "") + ": " if line else ""
        super().__init__(where + message)


# -- angle expressions --------------------------------------------------------

_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
    ast.USub: operator.neg,
    ast.UAdd: operator.pos,
}


def eval_number(text: str) -> float:
    """Arithmetic on numbers and ``pi``; nothing else is accepted."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ValueError(f"unsupported expression {text!r}")

    try:
        value = ev(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ZeroDivisionError) as exc:
        raise ValueError(f"bad number {text!r}: {exc}") from None
    if not math.isfinite(value):
        raise ValueError(f"{text!r} is not finite")
    return value


# -- steps --------------------------------------------------------------------

@dataclass(frozen=True)
class Step:
    keyword: str
    args: tuple
    line: int = field(default=0, compare=False)

    def arg(self, name, default=None):
        return dict(self.args).get(name, default)

    def to_line(self) -> str:
        return _SERIALIZERS[self.keyword](dict(self.args))


@dataclass(frozen=True)
class ProtocolScript:
    steps: tuple
    source: str = field(default="", compare=False)

    def __len__(self) -> int:
        return len(self.steps)

    def tree(self) -> list:
        return [{"keyword": s.keyword, **{k: v for k, v in s.args}} for s in self.steps]


def _q(tok: str) -> str:
    return shlex.quote(tok)


def _fmt_kv(pairs) -> str:
    return " ".join(f"{k}={_q(v)}" for k, v in pairs)


_SERIALIZERS = {
    "params": lambda a: " ".join(["params", _q(a["source"])] + ([_fmt_kv(a["overrides"])] if a["overrides"] else [])),
    "cavity": lambda a: f"cavity {a['id']} {a['initial']}",
    "atom": lambda a: f"atom {a['id']} {a['internal']} {a['momentum']}",
    "bragg": lambda a: f"bragg {a['atom']} {','.join(f'{k}={v}' for k, v in a['routes']) if a['routes'] else a['cavity']} {a['duration']}",
    "pulse": lambda a: f"pulse {a['atom']} {a['arm']} {_q(a['theta'])} {_q(a['phi'])} {a['convention']}",
    "ramsey": lambda a: f"ramsey {a['target']}",
    "hadamard-momentum": lambda a: f"hadamard-momentum {a['atom']}",
    "phase": lambda a: f"phase {a['cavity']} {_q(a['angle'])}",
    "aux": lambda a: f"aux {a['id']} {a['cavity']} {a['duration']} {a['outcome']}",
    "splitter": lambda a: f"splitter {a['in0']} {a['in1']} {a['out2']} {a['out3']}",
    "detect": lambda a: f"detect {','.join(a['modes'])} {a['mode']}",
    "measure": lambda a: " ".join(
        [f"measure {','.join(a['atoms'])} {','.join(a['parts'])} {a['outcome']}"]
        + ([f"entropy={a['entropy']}"] if a["entropy"] else [])),
    "drop": lambda a: f"drop {a['id']}",
    "oracle": lambda a: "oracle " + _fmt_kv(a["options"]) if a["options"] else "oracle",
    "expect-fidelity": lambda a: f"expect fidelity {a['target']} {a['threshold']}",
    "expect-entropy": lambda a: f"expect entropy {a['bipartition']} {a['value']} {a['tol']}",
}

KEYWORDS = ("params", "cavity", "atom", "bragg", "pulse", "ramsey", "hadamard-momentum", "phase", "aux",
            "splitter", "detect", "measure", "drop", "oracle", "expect")

ORACLE_KEYS = ("branch", "beta_t", "lmax", "tol")


class _Scope:
    """Tracks which ids exist at each point of the script."""

    def __init__(self):
        self.atoms: set = set()
        self.modes: set = set()
        self.aux: set = set()

    def need_atom(self, a, line):
        if a not in self.atoms:
            raise ScriptError(f"undefined atom {a!r}", line)

    def need_mode(self, m, line):
        if m not in self.modes:
            raise ScriptError(f"undefined mode {m!r}", line)

    def fresh(self, i, line):
        if i in self.atoms or i in self.modes or i in self.aux:
            raise ScriptError(f"id {i!r} already defined", line)


def _split_list(tok: str) -> tuple:
    return tuple(t for t in tok.split(",") if t)


def _duration(tok: str, line: int) -> str:
    if tok == "auto":
        return tok
    try:
        v = eval_number(tok)
    except ValueError as exc:
        raise ScriptError(str(exc), line) from None
    if v < 0:
        raise ScriptError("duration must be non-negative", line)
    return tok


def _number(tok: str, line: int, what: str) -> str:
    try:
        eval_number(tok)
    except ValueError as exc:
        raise ScriptError(f"{what}: {exc}", line) from None
    return tok


def _expect_fidelity(rest: str, line: int, col0: int, base: Path | None) -> Step:
    rest_s = rest.lstrip()
    col = col0 + len(rest) - len(rest_s)
    if rest_s.startswith("@"):
        parts = rest_s.split()
        if len(parts) != 2:
            raise ScriptError("expect fidelity @file <threshold>", line, col)
        path = Path(parts[0][1:])
        if base is not None and not path.is_absolute():
            path = base / path
        try:
            json.loads(path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ScriptError(f"cannot read state literal {parts[0]}: {exc}", line, col) from None
        target, tail = parts[0], parts[1]
    else:
        try:
            obj, end = json.JSONDecoder().raw_decode(rest_s)
        except ValueError as exc:
            raise ScriptError(f"malformed state literal: {exc}", line, col) from None
        if not isinstance(obj, dict) or "amplitudes" not in obj:
            raise ScriptError("state literal needs an 'amplitudes' list", line, col)
        target = json.dumps(obj, sort_keys=True, separators=(",", ":"))
        tail = rest_s[end:].strip()
        if len(tail.split()) != 1:
            raise ScriptError("expect fidelity <literal> <threshold>", line)
    return Step("expect-fidelity", (("target", target), ("threshold", _number(tail, line, "threshold"))), line)


def parse_script(text: str, base_dir: str | Path | None = None) -> ProtocolScript:
    """Parse script text; errors carry the offending line number."""
    base = Path(base_dir) if base_dir is not None else None
    scope = _Scope()
    steps = []
    for n, raw in enumerate(text.splitlines(), 1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        indent = len(raw) - len(raw.lstrip()) + 1
        if stripped.startswith("expect") and stripped.split(None, 2)[1:2] == ["fidelity"]:
            head = raw.index("fidelity") + len("fidelity")
            steps.append(_expect_fidelity(raw[head:], n, head + 1, base))
            continue
        try:
            toks = shlex.split(stripped, comments=True)
        except ValueError as exc:
            raise ScriptError(str(exc), n, indent) from None
        if not toks:
            continue
        steps.append(_parse_tokens(toks, n, scope, indent))
    return ProtocolScript(tuple(steps), text)


def _arity(toks, lo, hi, line, usage):
    if not lo <= len(toks) - 1 <= hi:
        raise ScriptError(f"usage: {usage}", line)


def _parse_tokens(toks: list, n: int, scope: _Scope, col: int) -> Step:
    kw = toks[0]
    if kw not in KEYWORDS:
        raise ScriptError(f"unknown keyword {kw!r}", n, col)
    if kw == "params":
        if len(toks) < 2:
            raise ScriptError("usage: params <preset|file> [key=value ...]", n)
        src = toks[1]
        if "=" in src:
            raise ScriptError("params needs a preset name or file first", n)
        if not (src in _known_presets() or src.endswith(".preset") or "/" in src):
            raise ScriptError(f"unknown preset {src!r}", n)
        overrides = []
        for t in toks[2:]:
            if "=" not in t:
                raise ScriptError(f"override {t!r} is not key=value", n)
            k, v = t.split("=", 1)
            overrides.append((k, v))
        return Step("params", (("source", src), ("overrides", tuple(overrides))), n)
    if kw == "cavity":
        _arity(toks, 1, 2, n, "cavity <id> [superposition|0|1]")
        initial = toks[2] if len(toks) > 2 else "superposition"
        if initial not in ("superposition", "0", "1"):
            raise ScriptError(f"unknown cavity preparation {initial!r}", n)
        scope.fresh(toks[1], n)
        scope.modes.add(toks[1])
        return Step(kw, (("id", toks[1]), ("initial", initial)), n)
    if kw == "atom":
        _arity(toks, 1, 3, n, "atom <id> [g|e] [P0|P-2]")
        internal = toks[2] if len(toks) > 2 else "g"
        mom = toks[3] if len(toks) > 3 else "P0"
        if internal not in ("g", "e") or mom not in ("P0", "P-2"):
            raise ScriptError(f"bad atom preparation {internal} {mom}", n)
        if "." in toks[1]:
            raise ScriptError("atom ids may not contain '.'", n)
        scope.fresh(toks[1], n)
        scope.atoms.add(toks[1])
        return Step(kw, (("id", toks[1]), ("internal", internal), ("momentum", mom)), n)
    if kw == "bragg":
        _arity(toks, 2, 3, n, "bragg <atom> <cavity|arm=cavity,...> [auto|t]")
        scope.need_atom(toks[1], n)
        routes = ()
        cav = None
        if "=" in toks[2]:
            routes = tuple(tuple(r.split("=", 1)) for r in _split_list(toks[2]))
            for arm, c in routes:
                if arm not in ("P0", "P-2"):
                    raise ScriptError(f"unknown arm {arm!r}", n)
                scope.need_mode(c, n)
        else:
            cav = toks[2]
            scope.need_mode(cav, n)
        dur = _duration(toks[3] if len(toks) > 3 else "auto", n)
        return Step(kw, (("atom", toks[1]), ("cavity", cav), ("routes", routes), ("duration", dur)), n)
    if kw == "pulse":
        _arity(toks, 3, 5, n, "pulse <atom> <arm|*> <theta> [phi] [positive|negative]")
        scope.need_atom(toks[1], n)
        arm = toks[2]
        if arm not in ("P0", "P-2", "*"):
            raise ScriptError(f"unknown arm {arm!r}", n)
        theta = _number(toks[3], n, "theta")
        if eval_number(theta) < 0:
            raise ScriptError("pulse area must be non-negative", n)
        phi = _number(toks[4], n, "phi") if len(toks) > 4 else "0"
        conv = toks[5] if len(toks) > 5 else "negative"
        if conv not in ("positive", "negative"):
            raise ScriptError(f"unknown convention {conv!r}", n)
        return Step(kw, (("atom", toks[1]), ("arm", arm), ("theta", theta), ("phi", phi), ("convention", conv)), n)
    if kw == "ramsey":
        _arity(toks, 1, 1, n, "ramsey <atom|aux>")
        if toks[1] not in scope.atoms and toks[1] not in scope.aux:
            raise ScriptError(f"undefined atom {toks[1]!r}", n)
        return Step(kw, (("target", toks[1]),), n)
    if kw == "hadamard-momentum":
        _arity(toks, 1, 1, n, "hadamard-momentum <atom>")
        scope.need_atom(toks[1], n)
        return Step(kw, (("atom", toks[1]),), n)
    if kw == "phase":
        _arity(toks, 2, 2, n, "phase <cavity> <angle>")
        scope.need_mode(toks[1], n)
        return Step(kw, (("cavity", toks[1]), ("angle", _number(toks[2], n, "angle"))), n)
    if kw == "aux":
        _arity(toks, 2, 4, n, "aux <id> <cavity> [auto|t] [g|e]")
        scope.need_mode(toks[2], n)
        scope.fresh(toks[1], n)
        outcome = toks[4] if len(toks) > 4 else "e"
        if outcome not in ("g", "e"):
            raise ScriptError(f"aux outcome must be g or e, got {outcome!r}", n)
        dur = _duration(toks[3] if len(toks) > 3 else "auto", n)
        scope.modes.discard(toks[2])
        return Step(kw, (("id", toks[1]), ("cavity", toks[2]), ("duration", dur), ("outcome", outcome)), n)
    if kw == "splitter":
        _arity(toks, 4, 4, n, "splitter <in0> <in1> <out2> <out3>")
        for m in toks[1:3]:
            scope.need_mode(m, n)
        for m in toks[3:5]:
            scope.fresh(m, n)
        scope.modes.difference_update(toks[1:3])
        scope.modes.update(toks[3:5])
        return Step(kw, tuple(zip(("in0", "in1", "out2", "out3"), toks[1:5])), n)
    if kw == "detect":
        _arity(toks, 2, 2, n, "detect <mode,...> <total=N|n,...|enumerate>")
        modes = _split_list(toks[1])
        for m in modes:
            scope.need_mode(m, n)
        mode = toks[2]
        if mode.startswith("total="):
            if not mode[6:].isdigit():
                raise ScriptError(f"bad photon total {mode!r}", n)
        elif mode != "enumerate":
            counts = _split_list(mode)
            if len(counts) != len(modes) or not all(c.isdigit() for c in counts):
                raise ScriptError("photon counts must match the listed modes", n)
            scope.modes.difference_update(modes)
        return Step(kw, (("modes", modes), ("mode", mode)), n)
    if kw == "measure":
        _arity(toks, 3, 4, n, "measure <atom,...> <int,mom> <labels|enumerate> [entropy=A|B]")
        atoms = _split_list(toks[1])
        for a in atoms:
            scope.need_atom(a, n)
        parts = _split_list(toks[2])
        if not parts or any(p not in ("int", "mom") for p in parts):
            raise ScriptError("subsystems must be drawn from int,mom", n)
        outcome = toks[3]
        if outcome not in ("enumerate", "sample"):
            labels = _split_list(outcome)
            if len(labels) != len(atoms) * len(parts):
                raise ScriptError(f"expected {len(atoms) * len(parts)} outcome labels", n)
            if set(parts) == {"int", "mom"}:
                scope.atoms.difference_update(atoms)
        entropy = None
        if len(toks) > 4:
            if not toks[4].startswith("entropy="):
                raise ScriptError(f"unexpected {toks[4]!r}", n)
            entropy = toks[4][len("entropy="):]
            _bipartition(entropy, n)
        return Step(kw, (("atoms", atoms), ("parts", parts), ("outcome", outcome), ("entropy", entropy)), n)
    if kw == "drop":
        _arity(toks, 1, 1, n, "drop <id>")
        i = toks[1]
        if i in scope.atoms:
            scope.atoms.discard(i)
        elif i in scope.modes:
            scope.modes.discard(i)
        else:
            raise ScriptError(f"undefined id {i!r}", n)
        return Step(kw, (("id", i),), n)
    if kw == "oracle":
        opts = []
        for t in toks[1:]:
            k, _, v = t.partition("=")
            if k not in ORACLE_KEYS or not v:
                raise ScriptError(f"oracle option {t!r} not one of {ORACLE_KEYS}", n)
            if k == "branch" and v not in ("ground", "excited"):
                raise ScriptError(f"unknown branch {v!r}", n)
            if k != "branch":
                _number(v, n, k)
            opts.append((k, v))
        return Step(kw, (("options", tuple(opts)),), n)
    # expect entropy
    if len(toks) < 2 or toks[1] != "entropy":
        raise ScriptError("expect needs 'fidelity' or 'entropy'", n)
    _arity(toks, 4, 4, n, "expect entropy <A|B> <value> <tol>")
    _bipartition(toks[2], n)
    return Step("expect-entropy", (("bipartition", toks[2]), ("value", _number(toks[3], n, "value")),
                                   ("tol", _number(toks[4], n, "tol"))), n)


def _bipartition(text: str, line: int) -> tuple:
    left, sep, right = text.partition("|")
    if not sep or not left or not right:
        raise ScriptError(f"bipartition {text!r} must look like a1,a2|a3", line)
    return _split_list(left), _split_list(right)


def serialize_script(script: ProtocolScript) -> str:
    return "".join(s.to_line() + "\n" for s in script.steps)


def load_script(path) -> ProtocolScript:
    path = Path(path)
    return parse_script(path.read_text(encoding="utf-8"), base_dir=path.parent)
