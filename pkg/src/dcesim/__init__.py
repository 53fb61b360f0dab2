"""Switched ultrastrong qubit-field coupling: field states, Wigner negativity, transitions."""

__version__ = "0.1.0"

from .fock import (ConditioningError, FieldKind, FieldState, FockBasis, JointState,
                   TruncationError, condition_on_qubit, field_state, parity_expectation,
                   partial_trace_qubit, populations)
from .model import ModelParams, build_h0, build_hamiltonian, build_interaction, parity_operator
from .propagator import SpectralCache, diagonalize, evolve, evolve_series, simulate
from .wigner import WignerGrid, NegativityResult, auto_extent, negativity, wigner_function
from .dyson import dyson_state, perturbative_threshold
from .threshold import ThresholdResult
from .explorer import SweepSpec, exact_threshold, figure_dataset, negativity_surface
