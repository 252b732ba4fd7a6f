"""
Random Pauli-basis measurements and classical-shadow snapshots.

The single-qubit measurement is one 6-outcome POVM with elements
(1/3)|v><v| over the eigenbases of Z, X and Y; n qubits use the tensor
product (6^n outcomes, labels joined with commas). The snapshot of an
outcome inverts the measurement channel, 3|v><v| - I per qubit.
"""

import itertools
from dataclasses import dataclass, replace
from functools import reduce
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from .hermitian_linalg import as_hermitian
from .quantum_core import Povm, born_probabilities, random_density_matrix

SINGLE_QUBIT_LABELS: Tuple[str, ...] = ("Z+", "Z-", "X+", "X-", "Y+", "Y-")

_SQRT_HALF = 1.0 / np.sqrt(2.0)
SINGLE_QUBIT_VECTORS: Dict[str, np.ndarray] = {
    "Z+": np.array([1.0, 0.0], dtype=complex),
    "Z-": np.array([0.0, 1.0], dtype=complex),
    "X+": np.array([_SQRT_HALF, _SQRT_HALF], dtype=complex),
    "X-": np.array([_SQRT_HALF, -_SQRT_HALF], dtype=complex),
    "Y+": np.array([_SQRT_HALF, 1j * _SQRT_HALF], dtype=complex),
    "Y-": np.array([_SQRT_HALF, -1j * _SQRT_HALF], dtype=complex),
}

Outcome = Union[int, str]


class UnknownOutcomeError(KeyError):
    """Raised when an outcome label or index is not in the scheme alphabet"""
    pass


def parse_outcome_label(label: str) -> str:
    """Normalize a label: strip spaces, map the Unicode minus to '-'."""
    return ",".join(part.strip().replace("−", "-") for part in label.split(","))


@dataclass(frozen=True)
class Snapshot:
    mat: np.ndarray
    outcome: str


@dataclass(frozen=True)
class PauliShadowScheme:
    """Uniform random Pauli-basis measurement on ``n_qubits`` qubits."""

    n_qubits: int
    povm: Povm
    snapshot_table: np.ndarray

    @classmethod
    def build(cls, n_qubits: int = 1) -> "PauliShadowScheme":
        if n_qubits < 1:
            raise ValueError(f"n_qubits must be positive, got {n_qubits}")
        projectors = {
            label: np.outer(v, v.conj()) for label, v in SINGLE_QUBIT_VECTORS.items()
        }
        identity = np.eye(2, dtype=complex)
        labels: List[str] = []
        elements: List[np.ndarray] = []
        snapshots: List[np.ndarray] = []
        for combo in itertools.product(SINGLE_QUBIT_LABELS, repeat=n_qubits):
            labels.append(",".join(combo))
            elements.append(reduce(np.kron, [projectors[c] / 3.0 for c in combo]))
            snapshots.append(reduce(np.kron, [3.0 * projectors[c] - identity for c in combo]))
        povm = Povm(elements=np.stack(elements), labels=tuple(labels))
        return cls(n_qubits=n_qubits, povm=povm, snapshot_table=np.stack(snapshots))

    @property
    def labels(self) -> Tuple[str, ...]:
        return self.povm.labels

    @property
    def n_outcomes(self) -> int:
        return self.povm.n_outcomes

    def with_snapshot_table(self, table: np.ndarray) -> "PauliShadowScheme":
        """Copy of the scheme with a replaced snapshot table (self-check hook)."""
        return replace(self, snapshot_table=as_hermitian(table))

    def index_of(self, outcome: Outcome) -> int:
        if isinstance(outcome, (int, np.integer)):
            if not 0 <= int(outcome) < self.n_outcomes:
                raise UnknownOutcomeError(f"Outcome index {outcome} out of range")
            return int(outcome)
        label = parse_outcome_label(str(outcome))
        try:
            return self.labels.index(label)
        except ValueError:
            raise UnknownOutcomeError(f"Unknown outcome label: {outcome!r}") from None


def sample_outcomes(rho, scheme: PauliShadowScheme, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` i.i.d. outcome indices from the Born distribution of rho"""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    probs = born_probabilities(rho, scheme.povm)
    return rng.choice(scheme.n_outcomes, size=n, p=probs / probs.sum())


def snapshot(outcome: Outcome, scheme: PauliShadowScheme) -> Snapshot:
    index = scheme.index_of(outcome)
    return Snapshot(mat=scheme.snapshot_table[index], outcome=scheme.labels[index])


def snapshots_for(outcomes: Sequence[Outcome], scheme: PauliShadowScheme) -> np.ndarray:
    """Stacked snapshot matrices (n, D, D) aligned with ``outcomes``"""
    indices = np.fromiter((scheme.index_of(o) for o in outcomes), dtype=int, count=len(outcomes))
    return scheme.snapshot_table[indices]


def mean_snapshot(snapshots) -> np.ndarray:
    """Arithmetic mean of snapshots (Snapshot objects or a matrix stack)"""
    if len(snapshots) == 0:
        raise ValueError("Cannot average an empty snapshot list")
    if isinstance(snapshots[0], Snapshot):
        stack = np.stack([s.mat for s in snapshots])
    else:
        stack = np.asarray(snapshots, dtype=complex)
    if stack.ndim != 3 or stack.shape[-1] != stack.shape[-2]:
        raise ValueError(f"Snapshots must share one square shape, got {stack.shape}")
    return stack.mean(axis=0)


def unbiasedness_error(rho, scheme: PauliShadowScheme) -> float:
    """Max entrywise |sum_m Tr(Pi_m rho) snapshot_m - rho| by exact enumeration"""
    probs = born_probabilities(rho, scheme.povm)
    reconstructed = np.einsum("m,mij->ij", probs, scheme.snapshot_table)
    return float(np.abs(reconstructed - rho).max())


def check_unbiasedness(scheme: PauliShadowScheme, n_states: int, rng: np.random.Generator) -> float:
    """Worst enumeration error over ``n_states`` random full-rank states"""
    if n_states < 1:
        raise ValueError(f"n_states must be at least 1, got {n_states}")
    dim = scheme.povm.dim
    return max(
        unbiasedness_error(random_density_matrix(dim, rng), scheme) for _ in range(n_states)
    )
