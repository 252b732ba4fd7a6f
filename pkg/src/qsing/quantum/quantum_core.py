"""
Physical states and measurements: density matrices, POVMs, Born-rule
probabilities, quantum relative entropy and classical KL divergence.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .hermitian_linalg import (
    DEFAULT_EIGEN_FLOOR,
    as_hermitian,
    eigh,
    matrix_log,
    trace_product,
)

STATE_TOL = 1e-10
CLIP_WINDOW = 1e-12
COMPLETENESS_RANK_TOL = 1e-8


class InvalidStateError(ValueError):
    """Raised when a matrix is not a density matrix within tolerance"""
    pass


class InvalidPovmError(ValueError):
    """Raised when POVM elements are not PSD or do not sum to the identity"""
    pass


class SupportViolation(ValueError):
    """Raised when q puts mass where p has none"""
    pass


def as_density_matrix(rho, tol: float = STATE_TOL) -> np.ndarray:
    """Validate PSD and unit trace; return the Hermitian complex128 array."""
    rho = as_hermitian(rho)
    if rho.ndim != 2:
        raise InvalidStateError(f"Expected a single matrix, got shape {rho.shape}")
    trace = np.trace(rho).real
    if abs(trace - 1.0) > tol:
        raise InvalidStateError(f"Trace is {trace!r}, expected 1")
    smallest = np.linalg.eigvalsh(rho).min()
    if smallest < -tol:
        raise InvalidStateError(f"Matrix has negative eigenvalue {smallest:.3e}")
    return rho


def pure_state(vector) -> np.ndarray:
    """|v><v| for a (not necessarily normalized) state vector"""
    v = np.asarray(vector, dtype=complex).ravel()
    norm = np.linalg.norm(v)
    if norm == 0:
        raise InvalidStateError("Zero vector has no pure state")
    v = v / norm
    return np.outer(v, v.conj())


def random_density_matrix(dim: int, rng: np.random.Generator, rank: Optional[int] = None) -> np.ndarray:
    """Random state from the Ginibre ensemble (full rank unless ``rank`` is given)"""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    rho = rho / np.trace(rho).real
    return 0.5 * (rho + rho.conj().T)


@dataclass(frozen=True)
class Povm:
    """Measurement as a stack of PSD elements (M, D, D) with outcome labels."""

    elements: np.ndarray
    labels: Tuple[str, ...]

    def __post_init__(self):
        elements = as_hermitian(self.elements)
        if elements.ndim != 3:
            raise InvalidPovmError(f"Expected an (M, D, D) stack, got shape {elements.shape}")
        if len(self.labels) != elements.shape[0]:
            raise InvalidPovmError(
                f"{len(self.labels)} labels for {elements.shape[0]} elements"
            )
        if len(set(self.labels)) != len(self.labels):
            raise InvalidPovmError("Outcome labels must be unique")
        smallest = np.linalg.eigvalsh(elements).min()
        if smallest < -STATE_TOL:
            raise InvalidPovmError(f"Element with negative eigenvalue {smallest:.3e}")
        dim = elements.shape[-1]
        if np.linalg.norm(elements.sum(axis=0) - np.eye(dim)) > STATE_TOL:
            raise InvalidPovmError("Elements do not sum to the identity")
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def dim(self) -> int:
        return self.elements.shape[-1]

    @property
    def n_outcomes(self) -> int:
        return self.elements.shape[0]

    @classmethod
    def from_elements(cls, elements: Sequence, labels: Optional[Sequence[str]] = None) -> "Povm":
        stack = np.stack([np.asarray(e, dtype=complex) for e in elements])
        if labels is None:
            labels = [str(i) for i in range(len(stack))]
        return cls(elements=stack, labels=tuple(labels))


def born_probabilities(rho, povm: Povm) -> np.ndarray:
    """Vector of Tr(Pi_m rho) for every POVM element.

    Round-off negatives down to -1e-12 are clipped; anything larger is an
    error. ``rho`` may be a stack, giving an (..., M) array.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape[-1] != povm.dim:
        raise ValueError(f"Dimension mismatch: state {rho.shape} vs POVM dim {povm.dim}")
    probs = np.einsum("mij,...ji->...m", povm.elements, rho).real
    if probs.min() < -CLIP_WINDOW or probs.max() > 1.0 + CLIP_WINDOW:
        raise InvalidStateError(
            f"Born probabilities outside [0, 1]: min {probs.min():.3e}, max {probs.max():.3e}"
        )
    probs = np.clip(probs, 0.0, 1.0)
    if np.any(np.abs(probs.sum(axis=-1) - 1.0) > STATE_TOL):
        raise InvalidStateError("Born probabilities do not sum to 1; state trace is off")
    return probs


def von_neumann_entropy(rho) -> float:
    """-Tr rho log rho with the 0 log 0 = 0 convention"""
    values = eigh(rho).eigenvalues
    values = values[values > CLIP_WINDOW]
    return float(-np.sum(values * np.log(values)))


def quantum_relative_entropy(rho, sigma, eigen_floor: float = DEFAULT_EIGEN_FLOOR) -> float:
    """D(rho || sigma) = Tr rho (log rho - log sigma).

    Zero eigenvalues of rho contribute nothing; sigma must be full rank.

    Raises:
        RankDeficientState: if sigma has an eigenvalue <= eigen_floor
        InvalidStateError: if either argument is not a density matrix
    """
    rho = as_density_matrix(rho)
    sigma = as_density_matrix(sigma)
    if rho.shape != sigma.shape:
        raise ValueError(f"Dimension mismatch: {rho.shape} vs {sigma.shape}")
    log_sigma = matrix_log(sigma, eigen_floor)
    return max(0.0, -von_neumann_entropy(rho) - trace_product(rho, log_sigma))


def kl_divergence(q, p) -> float:
    """KL(q || p) with the 0 log 0 = 0 convention.

    Raises:
        SupportViolation: if q_i > 0 where p_i = 0
    """
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if q.shape != p.shape:
        raise ValueError(f"Length mismatch: {q.shape} vs {p.shape}")
    support = q > 0
    if np.any(p[support] <= 0):
        raise SupportViolation("q has mass on outcomes where p is zero")
    return max(0.0, float(np.sum(q[support] * (np.log(q[support]) - np.log(p[support])))))


def is_tomographically_complete(povm: Povm) -> bool:
    """True iff the elements span the D^2-dimensional space of Hermitian matrices"""
    vectors = povm.elements.reshape(povm.n_outcomes, -1)
    gram = vectors.conj() @ vectors.T
    rank = np.linalg.matrix_rank(gram, tol=COMPLETENESS_RANK_TOL, hermitian=True)
    return int(rank) == povm.dim ** 2
