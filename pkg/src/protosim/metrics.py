"""Overlaps and entanglement measures on sparse kets."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .statekit import NORM_TOL, KetState, StateError, coefficient_matrix, inner

EIG_CLIP = 1e-12
EIG_FAIL = -1e-9


@dataclass(frozen=True)
class OverlapReport:
    fidelity: float
    phase: float
    basis_mismatch: bool = False

    def to_dict(self) -> dict:
        return {"fidelity": self.fidelity, "phase": self.phase, "basis_mismatch": self.basis_mismatch}


def fidelity(a: KetState, b: KetState) -> OverlapReport:
    """|<a|b>|^2 over normalized kets, with the phase of <a|b>.

    Registries must contain the same subsystem ids; a differing basis for the
    same id sets ``basis_mismatch`` (overlap is then taken on shared labels).
    """
    if sorted(a.ids) != sorted(b.ids):
        raise StateError(f"registry mismatch: {a.ids} vs {b.ids}")
    mismatch = any(a.spec(i).basis != b.spec(i).basis for i in a.ids)
    if mismatch:
        bmap = {frozenset(zip(b.ids, c)): y for c, y in b.amplitudes.items()}
        ov = sum((x.conjugate() * bmap.get(frozenset(zip(a.ids, c)), 0j) for c, x in a.amplitudes.items()), 0j)
    else:
        ov = inner(a, b)
    na, nb = a.norm_sq(), b.norm_sq()
    if na == 0 or nb == 0:
        raise StateError("fidelity with the zero state is undefined")
    f = abs(ov) ** 2 / (na * nb)
    return OverlapReport(float(f), cmath.phase(ov) if abs(ov) > 0 else 0.0, mismatch)


def _require_normalized(state: KetState):
    if state.is_zero or abs(state.norm_sq() - 1.0) > NORM_TOL:
        raise StateError(f"entanglement measures need a normalized state (norm^2 = {state.norm_sq():.12g})")


def _split(state: KetState, part: Sequence[str]) -> list:
    part = list(part)
    for i in part:
        state.position(i)
    if not part or len(set(part)) == len(state.ids):
        raise StateError("bipartition must be a proper nonempty subset of the registry")
    return part


def schmidt_coefficients(state: KetState, part: Sequence[str]) -> np.ndarray:
    """Singular values of the coefficient matrix, descending."""
    _require_normalized(state)
    _, _, M = coefficient_matrix(state, _split(state, part))
    return np.linalg.svd(M, compute_uv=False)


def entanglement_entropy(state: KetState, part: Sequence[str]) -> float:
    """Von Neumann entropy (bits) of the reduced state on ``part``."""
    s = schmidt_coefficients(state, part)
    lam = s ** 2
    return _entropy(lam)


def _entropy(lam: np.ndarray) -> float:
    if np.any(lam < EIG_FAIL):
        raise StateError(f"negative eigenvalue {lam.min():.3g} in reduced state")
    lam = lam[lam > EIG_CLIP]
    return float(-np.sum(lam * np.log2(lam)))


def negativity(state: KetState, parts: tuple) -> float:
    """Sum of |negative eigenvalues| of the partial transpose over ``parts[1]``.

    ``parts = (A, B)``; anything outside A and B is traced out first.
    """
    _require_normalized(state)
    A, B = list(parts[0]), list(parts[1])
    if set(A) & set(B):
        raise StateError("bipartition halves overlap")
    if not A or not B:
        raise StateError("both halves of the bipartition must be nonempty")
    for i in A + B:
        state.position(i)
    rest = [i for i in state.ids if i not in A and i not in B]
    pa = [state.position(i) for i in A]
    pb = [state.position(i) for i in B]
    pr = [state.position(i) for i in rest]
    ai: dict = {}
    bi: dict = {}
    ri: dict = {}
    entries = []
    for c, amp in state.amplitudes.items():
        a = ai.setdefault(tuple(c[p] for p in pa), len(ai))
        b = bi.setdefault(tuple(c[p] for p in pb), len(bi))
        r = ri.setdefault(tuple(c[p] for p in pr), len(ri))
        entries.append((a, b, r, amp))
    T = np.zeros((len(ai), len(bi), len(ri)), dtype=complex)
    for a, b, r, amp in entries:
        T[a, b, r] += amp
    # rho[(a,b),(a',b')] = sum_r T[a,b,r] conj(T[a',b',r]); transpose b <-> b'
    rho = np.einsum("abr,cdr->abcd", T, T.conj())
    pt = rho.transpose(0, 3, 2, 1).reshape(len(ai) * len(bi), -1)
    w = np.linalg.eigvalsh((pt + pt.conj().T) / 2)
    return float(-np.sum(w[w < -EIG_CLIP]))


def schmidt_pair_ok(state: KetState, part: Sequence[str], tol: float = 1e-9) -> bool:
    s = schmidt_coefficients(state, part)
    return len(s) >= 2 and all(abs(x - 1 / math.sqrt(2)) <= tol for x in s[:2]) and np.all(s[2:] <= tol)
