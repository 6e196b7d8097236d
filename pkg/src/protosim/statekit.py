"""Sparse kets over labeled composite bases.

A :class:`KetState` stores complex amplitudes keyed by configuration tuples,
one label per subsystem in registry order.  Every operation returns a new
state; nothing is mutated in place.
"""
from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

PRUNE = 1e-12
NORM_TOL = 1e-10
UNITARY_TOL = 1e-10
PURITY_TOL = 1e-10

KINDS = ("atom-internal", "atom-momentum", "cavity", "detector-mode")

Config = tuple  # tuple[str, ...] in registry order


class StateError(ValueError):
    """Invalid construction or use of a state."""


class ZeroStateError(StateError):
    pass


@dataclass(frozen=True)
class SubsystemSpec:
    id: str
    kind: str
    basis: tuple

    def __post_init__(self):
        object.__setattr__(self, "basis", tuple(str(b) for b in self.basis))
        if self.kind not in KINDS:
            raise StateError(f"unknown subsystem kind {self.kind!r}")
        if len(set(self.basis)) != len(self.basis):
            raise StateError(f"duplicate basis labels in {self.id!r}")
        if len(self.basis) < 2:
            raise StateError(f"subsystem {self.id!r} needs at least two basis states")

    @property
    def dim(self) -> int:
        return len(self.basis)

    def index(self, label: str) -> int:
        try:
            return self.basis.index(label)
        except ValueError:
            raise StateError(f"label {label!r} not in basis of {self.id!r}") from None

    def to_dict(self) -> dict:
        return {"id": self.id, "kind": self.kind, "basis": list(self.basis)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "SubsystemSpec":
        return cls(d["id"], d["kind"], tuple(d["basis"]))


def atom_internal(id: str) -> SubsystemSpec:
    return SubsystemSpec(id, "atom-internal", ("g", "e"))


def atom_momentum(id: str, labels: Sequence[str] = ("P0", "P-2")) -> SubsystemSpec:
    return SubsystemSpec(id, "atom-momentum", tuple(labels))


def momentum_ladder(lo: int, hi: int) -> tuple:
    """Even-order momentum labels from P{lo} to P{hi}, e.g. (-6, 4)."""
    return tuple(f"P{l}" for l in range(lo, hi + 1, 2))


def fock_mode(id: str, n_max: int = 1, kind: str = "cavity") -> SubsystemSpec:
    return SubsystemSpec(id, kind, tuple(str(n) for n in range(n_max + 1)))


def _check_registry(registry: Sequence[SubsystemSpec]) -> tuple:
    registry = tuple(registry)
    ids = [s.id for s in registry]
    if len(set(ids)) != len(ids):
        raise StateError(f"duplicate subsystem ids in registry: {ids}")
    return registry


def _index_key(registry, config) -> tuple:
    return tuple(s.basis.index(lab) for s, lab in zip(registry, config))


@dataclass(frozen=True, eq=False)
class KetState:
    """Immutable sparse ket.

    ``norm_tag`` is one of ``normalized``, ``post-selected`` (normalized, with
    the branch probability in ``probability``), ``unnormalized`` or ``zero``.
    """

    registry: tuple
    amplitudes: Mapping
    norm_tag: str = "normalized"
    probability: float | None = None
    _pos: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "registry", _check_registry(self.registry))
        object.__setattr__(self, "amplitudes", MappingProxyType(dict(self.amplitudes)))
        object.__setattr__(self, "_pos", {s.id: i for i, s in enumerate(self.registry)})

    # -- structure -------------------------------------------------------
    @property
    def ids(self) -> tuple:
        return tuple(s.id for s in self.registry)

    def spec(self, id: str) -> SubsystemSpec:
        return self.registry[self.position(id)]

    def position(self, id: str) -> int:
        try:
            return self._pos[id]
        except KeyError:
            raise StateError(f"unknown subsystem {id!r}") from None

    def has(self, id: str) -> bool:
        return id in self._pos

    def __len__(self) -> int:
        return len(self.amplitudes)

    @property
    def is_zero(self) -> bool:
        return not self.amplitudes

    def norm_sq(self) -> float:
        return math.fsum(abs(a) ** 2 for a in self.amplitudes.values())

    def norm(self) -> float:
        return math.sqrt(self.norm_sq())

    def amplitude(self, config: Mapping | Sequence) -> complex:
        return self.amplitudes.get(self._as_tuple(config), 0j)

    def label(self, config: Config, id: str) -> str:
        return config[self.position(id)]

    def config_dict(self, config: Config) -> dict:
        return dict(zip(self.ids, config))

    def sorted_items(self) -> list:
        """Items in lexicographic config order (basis indices, registry order)."""
        reg = self.registry
        return sorted(self.amplitudes.items(), key=lambda kv: _index_key(reg, kv[0]))

    def _as_tuple(self, config) -> Config:
        if isinstance(config, Mapping):
            if set(config) != set(self.ids):
                raise StateError(f"config {dict(config)} does not cover registry {self.ids}")
            config = tuple(config[i] for i in self.ids)
        config = tuple(str(c) for c in config)
        if len(config) != len(self.registry):
            raise StateError("config length does not match registry")
        for s, lab in zip(self.registry, config):
            s.index(lab)
        return config

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        d = {
            "registry": [s.to_dict() for s in self.registry],
            "amplitudes": [
                {"config": self.config_dict(c), "re": float(a.real), "im": float(a.imag)}
                for c, a in self.sorted_items()
            ],
        }
        if self.norm_tag != "normalized":
            d["norm_tag"] = self.norm_tag
        if self.probability is not None:
            d["probability"] = self.probability
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def __repr__(self) -> str:
        terms = " + ".join(f"({a:.4g})|{','.join(c)}>" for c, a in self.sorted_items()[:8])
        more = "" if len(self) <= 8 else f" + ... ({len(self)} terms)"
        return f"KetState[{','.join(self.ids)}]: {terms or '0'}{more}"


def _build(registry, amps: Mapping, norm_tag="normalized", probability=None) -> KetState:
    amps = {c: complex(a) for c, a in amps.items() if abs(a) >= PRUNE}
    if not amps and norm_tag != "zero":
        norm_tag = "zero"
    return KetState(registry, amps, norm_tag, probability)


def zero_state(registry: Sequence[SubsystemSpec]) -> KetState:
    return KetState(registry, {}, "zero")


def make_state(registry: Sequence[SubsystemSpec], terms: Iterable, normalize: bool = True) -> KetState:
    """Build a state from ``(config, amplitude)`` pairs.

    Configs may be mappings ``id -> label`` or label tuples in registry order.
    Repeated configs are summed.
    """
    probe = KetState(registry, {})
    amps: dict = {}
    terms = list(terms)
    if not terms:
        raise StateError("make_state needs at least one term")
    for config, amp in terms:
        key = probe._as_tuple(config)
        amps[key] = amps.get(key, 0j) + complex(amp)
    n2 = math.fsum(abs(a) ** 2 for a in amps.values())
    if n2 < PRUNE ** 2:
        raise ZeroStateError("all amplitudes are zero")
    if normalize:
        s = 1.0 / math.sqrt(n2)
        amps = {k: v * s for k, v in amps.items()}
        return _build(probe.registry, amps)
    tag = "normalized" if abs(n2 - 1.0) <= NORM_TOL else "unnormalized"
    return _build(probe.registry, amps, tag)


def basis_state(registry: Sequence[SubsystemSpec], config) -> KetState:
    return make_state(registry, [(config, 1.0)])


def from_dict(d: Mapping, registry: Sequence[SubsystemSpec] | None = None) -> KetState:
    """Inverse of :meth:`KetState.to_dict`.

    ``registry`` is used when the mapping carries none (script literals).
    """
    if "registry" in d:
        registry = [SubsystemSpec.from_dict(s) for s in d["registry"]]
    if registry is None:
        raise StateError("state literal has no registry and none was supplied")
    terms = [(e["config"], complex(e.get("re", 0.0), e.get("im", 0.0))) for e in d["amplitudes"]]
    probe = KetState(registry, {})
    amps: dict = {}
    for config, a in terms:
        key = probe._as_tuple(config)
        amps[key] = amps.get(key, 0j) + a
    tag = d.get("norm_tag", "normalized")
    return _build(probe.registry, amps, tag, d.get("probability"))


def from_json(text: str) -> KetState:
    return from_dict(json.loads(text))


# -- combination -------------------------------------------------------------

def tensor(a: KetState, b: KetState) -> KetState:
    clash = set(a.ids) & set(b.ids)
    if clash:
        raise StateError(f"subsystem id collision: {sorted(clash)}")
    amps = {ca + cb: x * y for ca, x in a.amplitudes.items() for cb, y in b.amplitudes.items()}
    tag = "normalized" if a.norm_tag == b.norm_tag == "normalized" else "unnormalized"
    if a.is_zero or b.is_zero:
        tag = "zero"
    return _build(a.registry + b.registry, amps, tag)


def add_subsystem(state: KetState, spec: SubsystemSpec, label: str) -> KetState:
    """Append a fresh subsystem prepared in basis state ``label``."""
    return tensor(state, KetState((spec,), {(label,): 1.0}))


def superpose(*states: KetState, weights: Sequence[complex] | None = None) -> KetState:
    """Linear combination of states sharing a registry (no renormalization)."""
    first = states[0]
    weights = weights or [1.0] * len(states)
    amps: dict = {}
    for st, w in zip(states, weights):
        if st.ids != first.ids:
            raise StateError("superpose needs identical registries")
        for c, a in st.amplitudes.items():
            amps[c] = amps.get(c, 0j) + w * a
    n2 = math.fsum(abs(a) ** 2 for a in amps.values())
    tag = "normalized" if abs(n2 - 1.0) <= NORM_TOL else "unnormalized"
    return _build(first.registry, amps, tag)


def scale(state: KetState, factor: complex) -> KetState:
    amps = {c: a * factor for c, a in state.amplitudes.items()}
    n2 = math.fsum(abs(a) ** 2 for a in amps.values())
    tag = "normalized" if abs(n2 - 1.0) <= NORM_TOL else "unnormalized"
    return _build(state.registry, amps, tag)


def normalized(state: KetState) -> KetState:
    n = state.norm()
    if n == 0.0:
        raise ZeroStateError("cannot normalize the zero state")
    return _build(state.registry, {c: a / n for c, a in state.amplitudes.items()})


def reorder(state: KetState, ids: Sequence[str]) -> KetState:
    """Permute the registry into the order given by ``ids``."""
    ids = list(ids)
    if sorted(ids) != sorted(state.ids):
        raise StateError(f"reorder ids {ids} do not match registry {state.ids}")
    perm = [state.position(i) for i in ids]
    amps = {tuple(c[p] for p in perm): a for c, a in state.amplitudes.items()}
    return KetState(tuple(state.registry[p] for p in perm), amps, state.norm_tag, state.probability)


def relabel(state: KetState, mapping: Mapping[str, str]) -> KetState:
    """Rename subsystem ids; ids absent from ``mapping`` keep their name."""
    reg = tuple(
        SubsystemSpec(mapping.get(s.id, s.id), s.kind, s.basis) for s in state.registry
    )
    return KetState(reg, state.amplitudes, state.norm_tag, state.probability)


# -- local operations ----------------------------------------------------------

def _target_layout(state: KetState, targets: Sequence[str]):
    targets = list(targets)
    if len(set(targets)) != len(targets):
        raise StateError(f"targets must be distinct: {targets}")
    pos = [state.position(t) for t in targets]
    specs = [state.registry[p] for p in pos]
    dims = [s.dim for s in specs]
    return pos, specs, dims


def target_index(specs, labels) -> int:
    """Mixed-radix index of ``labels`` over ``specs`` (first target most significant)."""
    idx = 0
    for s, lab in zip(specs, labels):
        idx = idx * s.dim + s.basis.index(lab)
    return idx


def target_labels(specs, idx: int) -> tuple:
    out = []
    for s in reversed(specs):
        idx, r = divmod(idx, s.dim)
        out.append(s.basis[r])
    return tuple(reversed(out))


def is_unitary(U: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    U = np.asarray(U)
    return U.shape[0] == U.shape[1] and np.allclose(U.conj().T @ U, np.eye(U.shape[0]), atol=tol, rtol=0)


def apply_local_unitary(state: KetState, targets: Sequence[str], U, check_unitary: bool = True) -> KetState:
    """Apply ``U`` to the joint configuration space of ``targets``.

    Rows and columns of ``U`` index target configurations in mixed radix with
    the first target most significant.  ``check_unitary=False`` is the
    projector path: the result is then tagged unnormalized unless its norm is
    still one.
    """
    U = np.asarray(U, dtype=complex)
    pos, specs, dims = _target_layout(state, targets)
    d = int(np.prod(dims))
    if U.shape != (d, d):
        raise StateError(f"operator shape {U.shape} does not match target dimension {d}")
    if check_unitary and not is_unitary(U):
        raise StateError("operator is not unitary")
    labels_of = [target_labels(specs, i) for i in range(d)]
    cols = [np.flatnonzero(np.abs(U[:, j]) > 0) for j in range(d)]
    out: dict = {}
    for config, amp in state.amplitudes.items():
        j = target_index(specs, [config[p] for p in pos])
        base = list(config)
        for i in cols[j]:
            for p, lab in zip(pos, labels_of[i]):
                base[p] = lab
            key = tuple(base)
            out[key] = out.get(key, 0j) + U[i, j] * amp
    if check_unitary and state.norm_tag in ("normalized", "post-selected"):
        return _build(state.registry, out, state.norm_tag, state.probability)
    n2 = math.fsum(abs(a) ** 2 for a in out.values())
    tag = "normalized" if abs(n2 - 1.0) <= NORM_TOL else "unnormalized"
    return _build(state.registry, out, tag)


def map_configs(state: KetState, fn: Callable[[Config], Iterable], check_norm: bool = True) -> KetState:
    """Apply a linear map given column-by-column.

    ``fn(config)`` yields ``(new_config, coefficient)`` pairs: the image of the
    basis ket.  With ``check_norm`` the map must preserve the norm of this
    particular state (an isometry on its support).
    """
    out: dict = {}
    for config, amp in state.amplitudes.items():
        for new, coeff in fn(config):
            out[new] = out.get(new, 0j) + coeff * amp
    n_in = state.norm_sq()
    n_out = math.fsum(abs(a) ** 2 for a in out.values())
    if check_norm and abs(n_out - n_in) > NORM_TOL:
        raise StateError(f"map is not norm preserving on this state ({n_in:.12g} -> {n_out:.12g})")
    tag = state.norm_tag if check_norm else ("normalized" if abs(n_out - 1) <= NORM_TOL else "unnormalized")
    return _build(state.registry, out, tag, state.probability if check_norm else None)


# -- measurement ------------------------------------------------------------

class Projection(NamedTuple):
    probability: float
    state: KetState

    @property
    def impossible(self) -> bool:
        return self.state.is_zero


def component(state: KetState, assignment: Mapping[str, str]) -> KetState:
    """Unnormalized part of ``state`` consistent with ``assignment``."""
    checks = [(state.position(i), lab) for i, lab in assignment.items()]
    for i, lab in assignment.items():
        state.spec(i).index(lab)
    amps = {c: a for c, a in state.amplitudes.items() if all(c[p] == lab for p, lab in checks)}
    return KetState(state.registry, amps, "unnormalized" if amps else "zero")


def project_where(state: KetState, predicate: Callable[[Config], bool]) -> Projection:
    total = state.norm_sq()
    amps = {c: a for c, a in state.amplitudes.items() if predicate(c)}
    kept = math.fsum(abs(a) ** 2 for a in amps.values())
    if not amps or kept == 0.0:
        return Projection(0.0, zero_state(state.registry))
    p = kept / total
    s = 1.0 / math.sqrt(kept)
    return Projection(p, _build(state.registry, {c: a * s for c, a in amps.items()}, "post-selected", p))


def project_and_collapse(state: KetState, assignment: Mapping[str, str]) -> Projection:
    """Post-select ``assignment``; the impossible branch comes back as a zero state."""
    for i, lab in assignment.items():
        state.spec(i).index(lab)
    checks = [(state.position(i), lab) for i, lab in assignment.items()]
    return project_where(state, lambda c: all(c[p] == lab for p, lab in checks))


# -- reduced states ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DensityMatrix:
    ids: tuple
    configs: tuple
    matrix: np.ndarray

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def purity(self) -> float:
        m = self.matrix
        return float(np.real(np.vdot(m, m)))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


def coefficient_matrix(state: KetState, keep: Sequence[str]):
    """Rows: distinct configs of ``keep``; columns: configs of the rest.

    Returns ``(row_configs, col_configs, M)`` with ``M[r, c]`` the amplitude.
    """
    keep = list(keep)
    kpos = [state.position(i) for i in keep]
    rpos = [p for p in range(len(state.registry)) if p not in kpos]
    rows: dict = {}
    cols: dict = {}
    entries = []
    for c, a in state.amplitudes.items():
        rk = tuple(c[p] for p in kpos)
        ck = tuple(c[p] for p in rpos)
        r = rows.setdefault(rk, len(rows))
        k = cols.setdefault(ck, len(cols))
        entries.append((r, k, a))
    M = np.zeros((len(rows), len(cols)), dtype=complex)
    for r, k, a in entries:
        M[r, k] += a
    kspecs = [state.registry[p] for p in kpos]
    order = sorted(rows, key=lambda rk: _index_key(kspecs, rk))
    M = M[[rows[o] for o in order], :]
    return tuple(order), tuple(cols), M


def reduced_density(state: KetState, keep: Sequence[str]) -> DensityMatrix:
    configs, _, M = coefficient_matrix(state, keep)
    return DensityMatrix(tuple(keep), configs, M @ M.conj().T)


def trace_out(state: KetState, drop_ids: Sequence[str]) -> DensityMatrix:
    drop_ids = list(drop_ids)
    if not drop_ids:
        raise StateError("trace_out needs at least one subsystem to drop")
    for i in drop_ids:
        state.position(i)
    keep = [i for i in state.ids if i not in drop_ids]
    if not keep:
        return DensityMatrix((), ((),), np.array([[state.norm_sq()]], dtype=complex))
    return reduced_density(state, keep)


def drop_product_subsystem(state: KetState, id: str) -> KetState:
    """Remove a subsystem that is unentangled with the rest.

    The subsystem's state is taken as the principal eigenvector of its reduced
    density matrix, phased so its largest component is real and positive;
    a basis-state subsystem is therefore removed without touching amplitudes.
    """
    p = state.position(id)
    rho = reduced_density(state, [id])
    n2 = rho.trace()
    if n2 == 0.0:
        raise StateError("cannot drop a subsystem from the zero state")
    if rho.purity() / n2 ** 2 < 1.0 - PURITY_TOL:
        raise StateError(f"subsystem {id!r} is entangled with the rest; measure or trace it instead")
    w, v = np.linalg.eigh(rho.matrix)
    phi = v[:, -1]
    k = int(np.argmax(np.abs(phi)))
    phi = phi * (abs(phi[k]) / phi[k])
    weight = {cfg[0]: np.conj(phi[i]) for i, cfg in enumerate(rho.configs)}
    out: dict = {}
    for c, a in state.amplitudes.items():
        w_ = weight.get(c[p], 0)
        if w_ == 0:
            continue
        key = c[:p] + c[p + 1:]
        out[key] = out.get(key, 0j) + w_ * a
    reg = state.registry[:p] + state.registry[p + 1:]
    n_out = math.fsum(abs(a) ** 2 for a in out.values())
    tag = state.norm_tag if abs(n_out - n2) <= NORM_TOL else "unnormalized"
    return _build(reg, out, tag, state.probability)


# -- comparison ------------------------------------------------------------

def inner(a: KetState, b: KetState) -> complex:
    """<a|b>; registries must hold the same ids (order may differ)."""
    if sorted(a.ids) != sorted(b.ids):
        raise StateError(f"registry mismatch: {a.ids} vs {b.ids}")
    if a.ids != b.ids:
        b = reorder(b, a.ids)
    small, big, conj_small = (a, b, True) if len(a) <= len(b) else (b, a, False)
    total = 0j
    for c, x in small.amplitudes.items():
        y = big.amplitudes.get(c)
        if y is not None:
            total += (x.conjugate() * y) if conj_small else (y.conjugate() * x)
    return total


def canonical_phase(state: KetState) -> tuple:
    """Rotate the global phase so the first amplitude (lexicographic) is real positive.

    Returns ``(rotated_state, removed_phase)``.
    """
    if state.is_zero:
        return state, 0.0
    _, first = state.sorted_items()[0]
    phase = cmath.phase(first)
    rot = cmath.exp(-1j * phase)
    amps = {c: a * rot for c, a in state.amplitudes.items()}
    return KetState(state.registry, amps, state.norm_tag, state.probability), phase
