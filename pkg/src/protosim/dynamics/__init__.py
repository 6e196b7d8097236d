"""Physical transformations used by the protocols."""
from .ladder import (
    AmplitudeLadder,
    IntegratorError,
    TruncationWarning,
    adiabaticity_sweep,
    bragg_ode_oracle,
    closed_form_ladder,
    compare_closed_form,
    initial_ladder,
    ladder_hamiltonian,
    ladder_infidelity,
    transfer_probability,
)
from .optics import DetectionOutcome, beam_splitter, detect_photons, postselect_photon_number
from .propagators import (
    FLIP_PHI,
    PulseSpec,
    RegimeWarning,
    UnsupportedSectorError,
    bragg_closed_form,
    bragg_rotation,
    bragg_routed,
    cavity_phase,
    classical_pulse,
    jc_resonant,
    momentum_hadamard,
    pulse_matrix,
    ramsey_zone,
)

__all__ = [
    "AmplitudeLadder",
    "DetectionOutcome",
    "IntegratorError",
    "PulseSpec",
    "RegimeWarning",
    "FLIP_PHI",
    "TruncationWarning",
    "UnsupportedSectorError",
    "adiabaticity_sweep",
    "beam_splitter",
    "bragg_closed_form",
    "bragg_ode_oracle",
    "bragg_rotation",
    "bragg_routed",
    "cavity_phase",
    "classical_pulse",
    "closed_form_ladder",
    "compare_closed_form",
    "detect_photons",
    "initial_ladder",
    "jc_resonant",
    "ladder_hamiltonian",
    "ladder_infidelity",
    "momentum_hadamard",
    "postselect_photon_number",
    "pulse_matrix",
    "ramsey_zone",
    "transfer_probability",
]
