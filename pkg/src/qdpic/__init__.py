"""Desk-scale simulator for a quantum-dot photon source feeding a programmable 4-mode circuit."""
from .circuit import MeshConfig, MziCell, compile_unitary, dft_unitary, mesh_to_unitary, mzi_unitary
from .detection import DetectorModel, TagStream, TimeTag, fit_hom_fringe, fit_lifetime, g2_estimator
from .interference import GramMatrix, PhotonConfig, full_distribution, output_probability, suppression_predicate
from .linalg import permanent_bruteforce, permanent_ryser, scattering_submatrix
from .source import SourceModel, demultiplex, generate_pulse_stream, loss_budget
from .tomography import TwoQubitState, bell_settings, fidelity, mle_reconstruct, pauli_expectation

__version__ = "0.1.0"

__all__ = [
    "DetectorModel", "GramMatrix", "MeshConfig", "MziCell", "PhotonConfig", "SourceModel", "TagStream",
    "TimeTag", "TwoQubitState", "bell_settings", "compile_unitary", "demultiplex", "dft_unitary", "fidelity",
    "fit_hom_fringe", "fit_lifetime", "full_distribution", "g2_estimator", "generate_pulse_stream",
    "loss_budget", "mesh_to_unitary", "mle_reconstruct", "mzi_unitary", "output_probability",
    "pauli_expectation", "permanent_bruteforce", "permanent_ryser", "scattering_submatrix",
    "suppression_predicate",
]
