"""Hermitian linear algebra, states and measurements, classical shadows."""

from .hermitian_linalg import (
    EigDecomposition,
    NonHermitianError,
    RankDeficientState,
    as_hermitian,
    eigh,
    matrix_exp,
    matrix_log,
    matrix_power,
    trace_product,
)
from .quantum_core import (
    InvalidPovmError,
    InvalidStateError,
    Povm,
    SupportViolation,
    as_density_matrix,
    born_probabilities,
    is_tomographically_complete,
    kl_divergence,
    pure_state,
    quantum_relative_entropy,
    random_density_matrix,
    von_neumann_entropy,
)
from .shadows import (
    PauliShadowScheme,
    Snapshot,
    UnknownOutcomeError,
    mean_snapshot,
    sample_outcomes,
    snapshot,
    snapshots_for,
)

__all__ = [
    "EigDecomposition",
    "InvalidPovmError",
    "InvalidStateError",
    "NonHermitianError",
    "PauliShadowScheme",
    "Povm",
    "RankDeficientState",
    "Snapshot",
    "SupportViolation",
    "UnknownOutcomeError",
    "as_density_matrix",
    "as_hermitian",
    "born_probabilities",
    "eigh",
    "is_tomographically_complete",
    "kl_divergence",
    "matrix_exp",
    "matrix_log",
    "matrix_power",
    "mean_snapshot",
    "pure_state",
    "quantum_relative_entropy",
    "random_density_matrix",
    "sample_outcomes",
    "snapshot",
    "snapshots_for",
    "trace_product",
    "von_neumann_entropy",
]
