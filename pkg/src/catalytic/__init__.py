"""Catalytic state transitions: construction and verification."""

from .classical import apply_protocol, build_classical_catalyst, verify_catalytic
from .errors import (
    CatalyticError,
    ChannelError,
    DegenerateTruncation,
    DimensionCapExceeded,
    EntropyGapError,
    MajorizationError,
    SchemaError,
    StateError,
)
from .majorization import majorizes, permutation_mixture, schur_horn_unitary, t_transform_chain
from .quantum import apply_quantum_protocol, build_quantum_catalyst, verify_transition
from .report import TransitionReport
from .statekit import SubsystemLayout, dimension_caps, entropy, partial_trace, trace_distance
from .thermo import asymptotic_work, catalytic_work, gibbs_state, is_passive, solve_beta
from .typicality import build_majorized_target, size_estimate, typical_truncate

__version__ = "0.1.0"
