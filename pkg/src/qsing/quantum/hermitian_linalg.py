"""
Dense linear algebra for small Hermitian matrices.

All functions accept a single (D, D) matrix or a stack shaped (..., D, D);
stacks are what the posterior sampler uses to build its log-state cache
in one call. Matrices are plain complex128 numpy arrays validated here at
the boundary.
"""

from dataclasses import dataclass

import numpy as np

HERMITIAN_TOL = 1e-10
DEFAULT_EIGEN_FLOOR = 1e-12


class NonHermitianError(ValueError):
    """Raised when a matrix is not Hermitian within tolerance"""
    pass


class RankDeficientState(ValueError):
    """Raised when an operator needs full rank but has an eigenvalue at or below the floor"""
    pass


@dataclass(frozen=True)
class EigDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        """Return V diag(w) V^dagger"""
        return _from_spectrum(self.eigenvectors, self.eigenvalues.astype(complex))


def _check_square(a: np.ndarray) -> None:
    if a.ndim < 2 or a.shape[-1] != a.shape[-2] or a.shape[-1] < 1:
        raise ValueError(f"Expected square matrices, got shape {a.shape}")


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    """Check max|A - A^dagger| <= tol * (1 + max|A|) for every matrix in the stack"""
    a = np.asarray(a)
    _check_square(a)
    deviation = np.abs(a - np.swapaxes(a.conj(), -1, -2)).max(axis=(-2, -1))
    scale = 1.0 + np.abs(a).max(axis=(-2, -1))
    return bool(np.all(deviation <= tol * scale))


def as_hermitian(a, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate and return the exactly symmetrized complex128 copy of ``a``."""
    a = np.asarray(a, dtype=complex)
    _check_square(a)
    if not np.all(np.isfinite(a)):
        raise NonHermitianError("Matrix has non-finite entries")
    if not is_hermitian(a, tol):
        raise NonHermitianError(f"Matrix of shape {a.shape} is not Hermitian within {tol}")
    return 0.5 * (a + np.swapaxes(a.conj(), -1, -2))


def _from_spectrum(vectors: np.ndarray, values: np.ndarray) -> np.ndarray:
    return (vectors * values[..., None, :]) @ np.swapaxes(vectors.conj(), -1, -2)


def eigh(a) -> EigDecomposition:
    """Eigendecomposition with real ascending eigenvalues and unitary eigenvector columns"""
    a = as_hermitian(a)
    values, vectors = np.linalg.eigh(a)
    return EigDecomposition(eigenvalues=values, eigenvectors=vectors)


def _spectral_map(a, fn, eigen_floor=None) -> np.ndarray:
    decomposition = eigh(a)
    values = decomposition.eigenvalues
    if eigen_floor is not None:
        smallest = values.min()
        if smallest <= eigen_floor:
            raise RankDeficientState(
                f"Smallest eigenvalue {smallest:.3e} is not above the floor {eigen_floor:.1e}"
            )
    mapped = fn(values).astype(complex)
    return _from_spectrum(decomposition.eigenvectors, mapped)


def matrix_log(p, eigen_floor: float = DEFAULT_EIGEN_FLOOR) -> np.ndarray:
    """Principal logarithm of a positive definite Hermitian matrix.

    Raises:
        RankDeficientState: if any eigenvalue is <= eigen_floor
    """
    return _spectral_map(p, np.log, eigen_floor)


def matrix_exp(a) -> np.ndarray:
    """Matrix exponential of a Hermitian matrix; the result is positive definite"""
    return _spectral_map(a, np.exp)


def matrix_power(p, t: float, eigen_floor: float = DEFAULT_EIGEN_FLOOR) -> np.ndarray:
    """Real power of a positive semidefinite Hermitian matrix.

    Negative exponents need full rank; nonnegative ones clip round-off
    negatives of the spectrum to zero.
    """
    if t < 0:
        return _spectral_map(p, lambda w: np.power(w, t), eigen_floor)
    if t == 0:
        p = as_hermitian(p)
        return np.broadcast_to(np.eye(p.shape[-1], dtype=complex), p.shape).copy()
    return _spectral_map(p, lambda w: np.power(np.clip(w, 0.0, None), t))


def trace_product(a, b) -> float:
    """Re Tr(AB) for Hermitian A, B; the imaginary part must vanish to 1e-10.

    Stacks broadcast against each other and return an array of traces.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    _check_square(a)
    _check_square(b)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"Dimension mismatch: {a.shape} vs {b.shape}")
    # Tr(AB) = sum_ij A_ij B_ji
    value = np.einsum("...ij,...ji->...", a, b)
    scale = 1.0 + np.abs(a).max() * np.abs(b).max() * a.shape[-1]
    if np.any(np.abs(value.imag) > HERMITIAN_TOL * scale):
        raise NonHermitianError("Tr(AB) has a non-negligible imaginary part; inputs are not Hermitian")
    real = value.real
    return float(real) if np.ndim(real) == 0 else real
