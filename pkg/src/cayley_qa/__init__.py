"""Quantum annealing of Rydberg-atom Cayley trees: geometry, Hamiltonians,
ground states, open-system dynamics, readout and tweezer holography."""

__version__ = "0.1.0"

from .constants import PhysicalConstants, mhz
from .errors import CayleyQAError
from .groundstate import PhaseLabel, brute_force_ground, classify, exact_ground_state, phase_diagram
from .hamiltonian import HamiltonianSpec, Mode, apply_hamiltonian, interaction_matrix, ising_parameters
from .lattice import Layout, build_dual_center_tree, build_regular_tree, named_graph, validate_geometry
from .measurement import SpamModel, apply_spam, sample_bitstrings
from .schedule import Schedule
from .dynamics import NoiseModel, StepControl, evolve_lindblad, evolve_schrodinger, evolve_trajectories
from .holography import SlmPlane, TargetSet, reconstruct_field, wgs_optimize

__all__ = [
    "PhysicalConstants", "mhz", "CayleyQAError",
    "PhaseLabel", "brute_force_ground", "classify", "exact_ground_state", "phase_diagram",
    "HamiltonianSpec", "Mode", "apply_hamiltonian", "interaction_matrix", "ising_parameters",
    "Layout", "build_dual_center_tree", "build_regular_tree", "named_graph", "validate_geometry",
    "SpamModel", "apply_spam", "sample_bitstrings", "Schedule",
    "NoiseModel", "StepControl", "evolve_lindblad", "evolve_schrodinger", "evolve_trajectories",
    "SlmPlane", "TargetSet", "reconstruct_field", "wgs_optimize",
]
