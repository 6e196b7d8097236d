"""Momentum-ladder amplitudes and the fixed-step RK4 oracle.

The truncated ladder equations are linear with a constant generator, so the
classical RK4 update is multiplication by the degree-4 Taylor polynomial
``R(hA)`` of ``A = -iH``.  ``N = 2**k`` steps are evaluated by squaring
``R - I`` k times (``(I+E)^2 = I + 2E + E^2``); the iterate is the same one
a step-by-step loop produces, without the loop.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..params import PhysicalParams
from .propagators import bragg_rotation

BRANCHES = {
    # spectator (kinetic only), interacting, intermediate (detuned)
    "ground": ("g0", "g1", "e0"),
    "excited": ("e1", "e0", "g1"),
}

DEFAULT_LMAX = 6
DEFAULT_TOL = 1e-8
LEAKAGE_WARN = 1e-6


class IntegratorError(RuntimeError):
    pass


class TruncationWarning(UserWarning):
    pass


@dataclass
class AmplitudeLadder:
    """Amplitudes C_x[l] for l in [-l_max, l_max] on one branch."""

    l_max: int
    branch: str
    arrays: dict
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.branch not in BRANCHES:
            raise ValueError(f"branch must be one of {sorted(BRANCHES)}")
        size = 2 * self.l_max + 1
        arrays = {}
        for name in BRANCHES[self.branch]:
            a = np.zeros(size, dtype=complex)
            if name in self.arrays:
                src = np.asarray(self.arrays[name], dtype=complex)
                if src.shape != (size,):
                    raise ValueError(f"array {name} must have length {size}")
                a[:] = src
            arrays[name] = a
        extra = set(self.arrays) - set(arrays)
        if extra:
            raise ValueError(f"arrays {sorted(extra)} do not belong to the {self.branch} branch")
        self.arrays = arrays

    @property
    def ls(self) -> np.ndarray:
        return np.arange(-self.l_max, self.l_max + 1)

    def index(self, l: int) -> int:
        if abs(l) > self.l_max:
            raise IndexError(f"l={l} outside [-{self.l_max}, {self.l_max}]")
        return l + self.l_max

    def get(self, name: str, l: int) -> complex:
        if abs(l) > self.l_max:
            return 0j
        return complex(self.arrays[name][self.index(l)])

    def vector(self) -> np.ndarray:
        return np.concatenate([self.arrays[n] for n in BRANCHES[self.branch]])

    @classmethod
    def from_vector(cls, v, l_max: int, branch: str, diagnostics=None) -> "AmplitudeLadder":
        size = 2 * l_max + 1
        names = BRANCHES[branch]
        return cls(l_max, branch, {n: v[i * size:(i + 1) * size] for i, n in enumerate(names)}, diagnostics or {})

    def resized(self, l_max: int) -> "AmplitudeLadder":
        if l_max == self.l_max:
            return AmplitudeLadder(l_max, self.branch, {k: v.copy() for k, v in self.arrays.items()})
        arrays = {}
        for name, a in self.arrays.items():
            out = np.zeros(2 * l_max + 1, dtype=complex)
            for l in self.ls:
                if abs(l) <= l_max:
                    out[l + l_max] = a[l + self.l_max]
                elif a[l + self.l_max] != 0:
                    raise ValueError(f"populated l={l} does not fit in l_max={l_max}")
            arrays[name] = out
        return AmplitudeLadder(l_max, self.branch, arrays)

    def norm_sq(self) -> float:
        return float(sum(np.vdot(a, a).real for a in self.arrays.values()))

    def edge_population(self) -> float:
        i, j = 0, 2 * self.l_max
        return float(sum(abs(a[i]) ** 2 + abs(a[j]) ** 2 for a in self.arrays.values()))


def initial_ladder(branch: str = "ground", l_max: int = DEFAULT_LMAX) -> AmplitudeLadder:
    """Atom entering a cavity in (|0>+|1>)/sqrt2.

    Ground branch: |g,P0>; excited branch: |e,P-2>.
    """
    spectator, interacting, _ = BRANCHES[branch]
    l = 0 if branch == "ground" else -2
    lad = AmplitudeLadder(l_max, branch, {})
    lad.arrays[spectator][lad.index(l)] = 1 / math.sqrt(2)
    lad.arrays[interacting][lad.index(l)] = 1 / math.sqrt(2)
    return lad


def ladder_hamiltonian(params: PhysicalParams, l_max: int, branch: str, intermediate_kinetic: bool = False) -> np.ndarray:
    """Generator H (i dC/dt = H C) of the truncated ladder.

    Kinetic energy l(l0+l) omega_r sits on the spectator and interacting
    arrays; the intermediate array carries the detuning (plus the kinetic
    term when ``intermediate_kinetic``).  Coupling mu/2 links interacting[l]
    to intermediate[l +- 1].
    """
    ls = np.arange(-l_max, l_max + 1)
    size = len(ls)
    kin = ls * (params.l0 + ls) * params.omega_r
    H = np.zeros((3 * size, 3 * size))
    H[np.arange(size), np.arange(size)] = kin
    H[size + np.arange(size), size + np.arange(size)] = kin
    H[2 * size + np.arange(size), 2 * size + np.arange(size)] = params.delta + (kin if intermediate_kinetic else 0.0)
    half = params.mu / 2.0
    for i in range(size):
        for j in (i - 1, i + 1):
            if 0 <= j < size:
                H[size + i, 2 * size + j] = half
                H[2 * size + j, size + i] = half
    return H


def rk4_increment(A: np.ndarray, h: float) -> np.ndarray:
    """R(hA) - I for one classical RK4 step of y' = A y."""
    X = h * A
    X2 = X @ X
    X3 = X2 @ X
    return X + X2 / 2 + X3 / 6 + (X3 @ X) / 24


def rk4_power(E: np.ndarray, levels: int) -> np.ndarray:
    """(I + E)^(2**levels) - I by repeated squaring."""
    for _ in range(levels):
        E = 2 * E + E @ E
    return E


def rk4_step(y: np.ndarray, A: np.ndarray, h: float) -> np.ndarray:
    """One explicit RK4 step, written out stage by stage."""
    k1 = A @ y
    k2 = A @ (y + 0.5 * h * k1)
    k3 = A @ (y + 0.5 * h * k2)
    k4 = A @ (y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def bragg_ode_oracle(
    initial: AmplitudeLadder,
    params: PhysicalParams,
    duration: float,
    l_max: int = DEFAULT_LMAX,
    tol: float = DEFAULT_TOL,
    intermediate_kinetic: bool = False,
    max_level: int = 60,
) -> AmplitudeLadder:
    """Integrate the full truncated ladder (no adiabatic elimination).

    Step count doubles until two successive refinements differ by less than
    ``tol`` (max-abs over amplitudes) and the finer solution's norm drift is
    also below ``tol``.  The drift test matters: at coarse steps RK4 damps the
    fast detuned modes, and two equally damped solutions can agree closely.
    """
    if l_max < 3:
        raise ValueError("l_max must be at least 3")
    if tol <= 0:
        raise ValueError("tol must be positive")
    lad = initial.resized(l_max)
    y0 = lad.vector()
    n0 = float(np.vdot(y0, y0).real)
    if duration == 0:
        lad.diagnostics = {"steps": 0, "norm_drift": 0.0, "leakage": lad.edge_population(), "refinement": 0.0}
        return lad
    H = ladder_hamiltonian(params, l_max, initial.branch, intermediate_kinetic)
    A = -1j * H
    bound = float(np.abs(H).sum(axis=1).max()) * abs(duration)
    level = max(0, math.ceil(math.log2(bound))) if bound > 1 else 0
    prev = None
    diff = drift = math.inf
    while level <= max_level:
        n_steps = 2 ** level
        E = rk4_power(rk4_increment(A, duration / n_steps), level)
        y = y0 + E @ y0
        drift = abs(float(np.vdot(y, y).real) - n0)
        if prev is not None:
            diff = float(np.abs(y - prev).max())
            if diff < tol and drift < tol:
                break
        prev = y
        level += 1
    else:
        raise IntegratorError(f"no convergence to tol={tol:g} within 2**{max_level} steps "
                              f"(last refinement {diff:.3g}, drift {drift:.3g})")
    if drift > 10 * tol:
        raise IntegratorError(f"norm drift {drift:.3g} exceeds 10*tol")
    out = AmplitudeLadder.from_vector(y, l_max, initial.branch)
    leak = out.edge_population()
    if leak > LEAKAGE_WARN:
        warnings.warn(f"population {leak:.3g} at |l| = l_max; enlarge the ladder", TruncationWarning, stacklevel=2)
    out.diagnostics = {"steps": n_steps, "norm_drift": drift, "leakage": leak, "refinement": diff}
    return out


def closed_form_ladder(initial: AmplitudeLadder, params: PhysicalParams, duration: float) -> AmplitudeLadder:
    """Adiabatic prediction on a ladder: P0/P-2 rotation on the interacting array."""
    spectator, interacting, intermediate = BRANCHES[initial.branch]
    out = initial.resized(initial.l_max)
    ls = out.ls
    kin = np.exp(-1j * ls * (params.l0 + ls) * params.omega_r * duration)
    out.arrays[spectator] = out.arrays[spectator] * kin
    inter = out.arrays[interacting] * kin
    i0, im2 = out.index(0), out.index(-2)
    R = bragg_rotation(params.beta * duration)
    pair = np.array([out.arrays[interacting][i0], out.arrays[interacting][im2]])
    inter[i0], inter[im2] = R @ pair
    out.arrays[interacting] = inter
    out.arrays[intermediate] = out.arrays[intermediate] * np.exp(-1j * params.delta * duration)
    return out


def ladder_infidelity(a: AmplitudeLadder, b: AmplitudeLadder) -> float:
    l_max = max(a.l_max, b.l_max)
    va, vb = a.resized(l_max).vector(), b.resized(l_max).vector()
    f = abs(np.vdot(va, vb)) ** 2 / (np.vdot(va, va).real * np.vdot(vb, vb).real)
    return float(1.0 - f)


def transfer_probability(final: AmplitudeLadder, initial: AmplitudeLadder) -> float:
    """Fraction of the photon-coupled branch moved to the deflected arm."""
    _, interacting, _ = BRANCHES[initial.branch]
    src, dst = (0, -2) if initial.branch == "ground" else (-2, 0)
    start = abs(initial.get(interacting, src)) ** 2
    return abs(final.get(interacting, dst)) ** 2 / start


def compare_closed_form(
    params: PhysicalParams,
    beta_t: float = math.pi / 2,
    branch: str = "ground",
    l_max: int = DEFAULT_LMAX,
    tol: float = DEFAULT_TOL,
    intermediate_kinetic: bool = False,
) -> dict:
    """One sweep row: oracle vs closed form at the given beta*t."""
    t = beta_t / params.beta
    init = initial_ladder(branch, l_max)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        ode = bragg_ode_oracle(init, params, t, l_max, tol, intermediate_kinetic)
    cf = closed_form_ladder(init, params, t)
    return {
        "delta_over_omega_r": params.ratio,
        "beta_t": beta_t,
        "infidelity": ladder_infidelity(ode, cf),
        "norm_drift": ode.diagnostics["norm_drift"],
        "leakage": ode.diagnostics["leakage"],
        "transfer_probability": transfer_probability(ode, init),
        "closed_form_transfer": transfer_probability(cf, init),
        "steps": ode.diagnostics["steps"],
    }


SWEEP_COLUMNS = ("delta_over_omega_r", "beta_t", "infidelity", "norm_drift", "leakage")


def adiabaticity_sweep(
    params: PhysicalParams,
    ratios=(1e2, 1e3, 1e4),
    mu_over_omega_r: float = 10.0,
    beta_t: float = math.pi / 2,
    l_max: int = DEFAULT_LMAX,
    tol: float = DEFAULT_TOL,
    branch: str = "ground",
) -> list:
    """Rows over Delta/omega_r at fixed coupling mu/omega_r and fixed beta*t.

    Holding mu fixed, a larger detuning shrinks both mu/Delta (adiabatic
    elimination error) and beta/omega_r (leakage to P2 and P-4).
    """
    rows = []
    for r in ratios:
        p = params.with_ratio(delta_over_omega_r=r, mu_over_omega_r=mu_over_omega_r)
        rows.append(compare_closed_form(p, beta_t, branch, l_max, tol))
    return rows
