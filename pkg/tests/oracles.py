"""Dense state-vector oracle, independent of the sparse state code.

Every subsystem is a tensor axis; gates are built from Hamiltonians with
scipy's matrix exponential (or from the mode-transformation matrix for the
beam splitter) and contracted onto their axes.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.linalg import expm

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SP = np.array([[0, 0], [1, 0]], dtype=complex)  # |e><g| in basis (g, e)
SM = SP.conj().T
B_DOWN = np.array([[0, 1], [0, 0]], dtype=complex)  # photon annihilation, n_max = 1
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)

LABELS = {
    "int": ("g", "e"),
    "mom": ("P0", "P-2"),
    "mode": ("0", "1"),
}


class Dense:
    """Named axes, each a two-level system."""

    def __init__(self):
        self.names: list = []
        self.kinds: list = []
        self.psi = np.ones((), dtype=complex)

    # -- structure -----------------------------------------------------------
    def add(self, name: str, kind: str, amps) -> "Dense":
        self.names.append(name)
        self.kinds.append(kind)
        self.psi = np.multiply.outer(self.psi, np.asarray(amps, dtype=complex))
        return self

    def add_atom(self, a: str, internal="g", momentum="P0"):
        self.add(f"{a}.int", "int", np.eye(2)[LABELS["int"].index(internal)])
        self.add(f"{a}.mom", "mom", np.eye(2)[LABELS["mom"].index(momentum)])

    def add_mode(self, name: str, amps=(1 / math.sqrt(2), 1 / math.sqrt(2))):
        self.add(name, "mode", amps)

    def axis(self, name):
        return self.names.index(name)

    def apply(self, op: np.ndarray, names) -> None:
        axes = [self.axis(n) for n in names]
        k = len(axes)
        op = op.reshape((2,) * (2 * k))
        moved = np.moveaxis(self.psi, axes, range(k))
        out = np.tensordot(op, moved, axes=(list(range(k, 2 * k)), list(range(k))))
        self.psi = np.moveaxis(out, range(k), axes)

    def norm_sq(self) -> float:
        return float(np.vdot(self.psi, self.psi).real)

    def project(self, assignment: dict) -> float:
        """Post-select labels, keep the axes; returns the branch probability."""
        total = self.norm_sq()
        mask = np.zeros_like(self.psi)
        idx = [slice(None)] * len(self.names)
        for n, lab in assignment.items():
            i = self.axis(n)
            idx[i] = LABELS[self.kinds[i]].index(lab)
        mask[tuple(idx)] = self.psi[tuple(idx)]
        p = float(np.vdot(mask, mask).real) / total
        self.psi = mask / math.sqrt(p * total)
        return p

    def remove(self, name: str) -> None:
        """Drop an axis whose population sits on a single label."""
        i = self.axis(name)
        weights = [float(np.sum(np.abs(np.take(self.psi, j, axis=i)) ** 2)) for j in range(2)]
        j = int(np.argmax(weights))
        assert weights[1 - j] < 1e-20, f"{name} is not in a basis state"
        self.psi = np.take(self.psi, j, axis=i)
        del self.names[i], self.kinds[i]

    def amplitudes(self, order=None) -> dict:
        """{tuple of (name, label) sorted by name: amplitude} for nonzero entries."""
        out = {}
        for idx in zip(*np.nonzero(np.abs(self.psi) > 1e-12)):
            key = tuple(sorted((n, LABELS[k][j]) for n, k, j in zip(self.names, self.kinds, idx)))
            out[key] = complex(self.psi[idx])
        return out


# -- gates --------------------------------------------------------------------

def effective_bragg(beta: float, t: float) -> np.ndarray:
    """Adiabatic generator on (P0, P-2): H = -beta (2 I + sigma_x)."""
    return expm(1j * beta * t * (2 * np.eye(2) + SX))


def bragg_gate(beta: float, t: float) -> np.ndarray:
    """On (int, mom, mode): rotate momentum where (g, 1) or (e, 0)."""
    U = np.zeros((8, 8), dtype=complex)
    R = effective_bragg(beta, t)
    for x in range(2):
        for n in range(2):
            block = R if (x == 0 and n == 1) or (x == 1 and n == 0) else np.eye(2)
            for p in range(2):
                for q in range(2):
                    U[x * 4 + p * 2 + n, x * 4 + q * 2 + n] = block[p, q]
    return U


def routed_bragg_gate(beta: float, t: float) -> np.ndarray:
    """On (int, mom, modeA, modeB): arm P0 talks to A, arm P-2 to B."""
    R = effective_bragg(beta, t)
    U = np.zeros((16, 16), dtype=complex)
    for x, q, na, nb in np.ndindex(2, 2, 2, 2):
        n = na if q == 0 else nb
        interacting = (x == 0 and n == 1) or (x == 1 and n == 0)
        col = ((x * 2 + q) * 2 + na) * 2 + nb
        if not interacting:
            U[col, col] = 1
            continue
        for p in range(2):
            U[((x * 2 + p) * 2 + na) * 2 + nb, col] += R[p, q]
    return U


def jc_gate(mu: float, t: float) -> np.ndarray:
    """On (int, mode): exp(-i mu t (sigma+ b + sigma- b^dag))."""
    H = mu * (np.kron(SP, B_DOWN) + np.kron(SM, B_DOWN.conj().T))
    return expm(-1j * H * t)


def pulse_gate(theta: float, phi: float, sign: int, arm: int | None) -> np.ndarray:
    """On (int, mom): H = sign (Omega/2)(e^{-i phi} sigma+ + e^{i phi} sigma-) for time theta/Omega."""
    H = sign * 0.5 * (np.exp(-1j * phi) * SP + np.exp(1j * phi) * SM)
    U2 = expm(-1j * H * theta)
    if arm is None:
        return np.kron(U2, np.eye(2))
    P = np.zeros((2, 2))
    P[arm, arm] = 1
    return np.kron(U2, P) + np.kron(np.eye(2), np.eye(2) - P)


def splitter_gate() -> np.ndarray:
    """On (in0, in1) -> (out2, out3), single-photon sector plus vacuum.

    Output operators a_out = B a_in; a photon in input j leaves in the
    superposition given by column j of B.  The |1,1> input is left alone
    (it is removed beforehand).
    """
    B = np.array([[1, 1j], [1j, 1]]) / math.sqrt(2)
    U = np.zeros((4, 4), dtype=complex)
    U[0, 0] = 1
    U[3, 3] = 1
    one = {0: 2, 1: 1}  # |1,0> is index 2, |0,1> is index 1
    for j in range(2):
        for k in range(2):
            U[one[k], one[j]] = B[k, j]
    return U


# -- pipelines ----------------------------------------------------------------

def dense_pair(d: Dense, atoms, cavity, aux, params, outcome="e"):
    beta, t = params.beta, 2 * math.pi * params.delta / params.mu ** 2
    d.add_mode(cavity)
    for a in atoms:
        d.add_atom(a)
        d.apply(bragg_gate(beta, t), [f"{a}.int", f"{a}.mom", cavity])
        d.apply(pulse_gate(math.pi, -math.pi / 2, +1, arm=1), [f"{a}.int", f"{a}.mom"])
    d.add(aux, "int", [1, 0])
    d.apply(jc_gate(params.mu, math.pi / (2 * params.mu)), [aux, cavity])
    d.apply(HADAMARD, [aux])
    p = d.project({aux: outcome})
    d.remove(aux)
    d.remove(cavity)
    return p


def dense_swap(params, aux=("g", "g")) -> Dense:
    """Full swap sequence up to (and including) Ramsey zones on atoms 2, 3."""
    d = Dense()
    dense_pair(d, ("a1", "a2"), "C1", "x1", params)
    dense_pair(d, ("a3", "a4"), "C2", "x2", params)
    d.add_mode("A")
    d.add_mode("B")
    beta, t = params.beta, 2 * math.pi * params.delta / params.mu ** 2
    for a in ("a2", "a3"):
        d.apply(routed_bragg_gate(beta, t), [f"{a}.int", f"{a}.mom", "A", "B"])
    for x, cav in (("s", "A"), ("t", "B")):
        d.add(x, "int", [1, 0])
        d.apply(jc_gate(params.mu, math.pi / (2 * params.mu)), [x, cav])
        d.apply(HADAMARD, [x])
    d.aux_probability = d.project({"s": aux[0], "t": aux[1]})
    for n in ("s", "t", "A", "B"):
        d.remove(n)
    for a in ("a2", "a3"):
        d.apply(HADAMARD, [f"{a}.int"])
    return d


def dense_delayed(params, n: int, detector="D1", compensate=True) -> tuple:
    """Returns (success probability, detector probability, Dense)."""
    beta, t = params.beta, 2 * math.pi * params.delta / params.mu ** 2
    d = Dense()
    half = n // 2
    for cav, atoms in (("C1", range(1, half + 1)), ("C2", range(half + 1, n + 1))):
        d.add_mode(cav)
        for i in atoms:
            d.add_atom(f"a{i}")
            d.apply(bragg_gate(beta, t), [f"a{i}.int", f"a{i}.mom", cav])
        if compensate:
            d.apply(np.diag([1, 1j ** half]), [cav])
    # one-photon sector across C1, C2
    i1, i2 = d.axis("C1"), d.axis("C2")
    total = d.norm_sq()
    keep = np.zeros_like(d.psi)
    for a, b in ((0, 1), (1, 0)):
        idx = [slice(None)] * len(d.names)
        idx[i1], idx[i2] = a, b
        keep[tuple(idx)] = d.psi[tuple(idx)]
    p_success = float(np.vdot(keep, keep).real) / total
    d.psi = keep / math.sqrt(p_success * total)
    d.apply(splitter_gate(), ["C2", "C1"])
    d.names[i2], d.names[i1] = "D1", "D2"
    p_det = d.project({"D1": "1", "D2": "0"} if detector == "D1" else {"D1": "0", "D2": "1"})
    d.remove("D1")
    d.remove("D2")
    return p_success, p_det, d


def sparse_as_dense_dict(state) -> dict:
    """Same keying as :meth:`Dense.amplitudes` for a sparse ket."""
    out = {}
    for c, a in state.amplitudes.items():
        out[tuple(sorted(zip(state.ids, c)))] = complex(a)
    return out


def overlap(a: dict, b: dict) -> complex:
    return sum(np.conj(v) * b.get(k, 0) for k, v in a.items())


def fidelity_dicts(a: dict, b: dict) -> float:
    na = sum(abs(v) ** 2 for v in a.values())
    nb = sum(abs(v) ** 2 for v in b.values())
    return abs(overlap(a, b)) ** 2 / (na * nb)


def reduced_entropy(d: Dense, keep) -> float:
    axes = [d.axis(n) for n in keep]
    rest = [i for i in range(len(d.names)) if i not in axes]
    M = np.moveaxis(d.psi, axes + rest, range(len(d.names))).reshape(2 ** len(axes), -1)
    s = np.linalg.svd(M, compute_uv=False) ** 2
    s = s[s > 1e-15]
    return float(-np.sum(s * np.log2(s)))
