"""
Generalization/training losses and information criteria for one dataset
and one posterior chain.

    G_n^Q = -Tr(rho log sigma_B)
    T_n^Q = -(1/n) sum_i Tr(rho_hat_i log sigma_B)
    C_n^Q = (1/n) sum_i Cov_theta[log p(x_i|theta), Tr(rho_hat_i log sigma(theta))]
    QWAIC = T_n^Q + C_n^Q

and the classical G_n, T_n, WAIC = T_n + (1/n) sum_i V_theta[log p(x_i|theta)].
Sums over data points are taken per distinct (outcome, snapshot) pair,
weighted by multiplicity.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.special import logsumexp

from ..quantum.hermitian_linalg import DEFAULT_EIGEN_FLOOR, matrix_log, trace_product
from ..quantum.quantum_core import Povm, SupportViolation, born_probabilities
from ..quantum.shadows import PauliShadowScheme, mean_snapshot, snapshots_for
from .models import (
    ParametricModel,
    domain_contains,
    log_likelihood_from_probabilities,
    outcome_counts,
    outcome_indices,
    sigma,
)
from .posterior import PosteriorSamples, bayes_mean_state, posterior_cov, state_weighted_log_variance
from .theory import FisherReport, NonFiniteDerivative, BoundaryTooClose, SingularHessian, numerical_hessians

logger = logging.getLogger(__name__)

ML_GRID_POINTS_1D = 401
ML_GRID_BUDGET = 61 * 61


@dataclass(frozen=True)
class CriteriaReport:
    n: int
    g_n_q: float
    t_n_q: float
    c_n_q: float
    qwaic: float
    g_n: float
    t_n: float
    waic: float
    qaic_ll: Optional[float] = None

    def as_dict(self) -> dict:
        return asdict(self)


def quantum_generalization_loss(rho_true, sigma_b, eigen_floor: float = DEFAULT_EIGEN_FLOOR) -> float:
    """G_n^Q = -Tr(rho log sigma_B)

    Raises:
        RankDeficientState: if sigma_B has an eigenvalue at or below the floor
    """
    return -trace_product(rho_true, matrix_log(sigma_b, eigen_floor))


def quantum_training_loss(snapshots, sigma_b, eigen_floor: float = DEFAULT_EIGEN_FLOOR) -> float:
    """T_n^Q = -(1/n) sum_i Tr(rho_hat_i log sigma_B); may be negative"""
    return -trace_product(mean_snapshot(snapshots), matrix_log(sigma_b, eigen_floor))


def _group_data(indices: np.ndarray, snapshot_stack: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Distinct (outcome, snapshot) pairs with multiplicities"""
    flat = snapshot_stack.reshape(len(indices), -1)
    keys = np.concatenate([indices[:, None].astype(float), flat.real, flat.imag], axis=1)
    _, first, counts = np.unique(keys, axis=0, return_index=True, return_counts=True)
    return indices[first], snapshot_stack[first], counts


def c_n_q(model: ParametricModel, samples: PosteriorSamples, outcomes, snapshots, povm: Povm) -> float:
    """Mean posterior covariance of classical and quantum log-likelihoods over the data.

    Args:
        model: Model the chain was run for
        samples: Retained samples with populated caches
        outcomes: Observed outcomes (labels or indices)
        snapshots: Snapshot per observation, aligned with ``outcomes``
        povm: Measurement behind the likelihood

    Returns:
        C_n^Q
    """
    indices = outcome_indices(outcomes, povm)
    stack = snapshots if isinstance(snapshots, np.ndarray) else np.stack([s.mat for s in snapshots])
    if len(stack) != len(indices):
        raise ValueError(f"{len(indices)} outcomes but {len(stack)} snapshots")
    if len(indices) == 0:
        raise ValueError("c_n_q needs at least one observation")
    if samples.log_sigma_cache.shape[-1] != model.hilbert_dim:
        raise ValueError("Posterior caches do not match the model dimension")

    symbols, group_snapshots, counts = _group_data(indices, np.asarray(stack, dtype=complex))
    classical = samples.log_lik_cache[symbols]                                   # (G, S)
    quantum = np.einsum("gij,sji->gs", group_snapshots, samples.log_sigma_cache).real
    covariances = posterior_cov(samples, classical, quantum)
    return float(np.dot(counts, covariances) / len(indices))


def qwaic(t_n_q: float, c_value: float) -> float:
    return t_n_q + c_value


def _log_predictive(samples: PosteriorSamples) -> np.ndarray:
    """log E_theta[p(x|theta)] for every symbol"""
    return logsumexp(samples.log_lik_cache, axis=1) - math.log(samples.n_samples)


def functional_variance(samples: PosteriorSamples, outcomes) -> float:
    """(1/n) sum_i V_theta[log p(x_i|theta)] with population variance over samples; outcomes are indices"""
    indices = np.asarray(outcomes, dtype=int)
    if indices.size == 0:
        raise ValueError("functional_variance needs at least one observation")
    counts = np.bincount(indices, minlength=samples.log_lik_cache.shape[0])
    observed = counts > 0
    variances = samples.log_lik_cache[observed].var(axis=1)
    return float(np.dot(counts[observed], variances)) / indices.size


def classical_losses(
    model: ParametricModel,
    samples: PosteriorSamples,
    outcomes,
    povm: Povm,
    q_true,
) -> Tuple[float, float, float]:
    """Classical (G_n, T_n, WAIC); G_n sums exactly over the outcome alphabet.

    Raises:
        SupportViolation: if the predictive distribution vanishes where q_true does not
    """
    indices = outcome_indices(outcomes, povm)
    if len(indices) == 0:
        raise ValueError("classical_losses needs at least one observation")
    q_true = np.asarray(q_true, dtype=float)
    if q_true.shape != (povm.n_outcomes,):
        raise ValueError(f"q_true has shape {q_true.shape}, expected ({povm.n_outcomes},)")

    log_predictive = _log_predictive(samples)
    support = q_true > 0
    if np.any(~np.isfinite(log_predictive[support])):
        raise SupportViolation(f"{model.model_id}: predictive probability vanishes on the support of q")
    g_n = -float(np.dot(q_true[support], log_predictive[support]))

    counts = outcome_counts(indices, povm.n_outcomes)
    observed = counts > 0
    t_n = -float(np.dot(counts[observed], log_predictive[observed])) / len(indices)
    waic = t_n + functional_variance(samples, indices)
    return g_n, t_n, waic


def ml_grid_points(dim: int) -> int:
    """Points per axis: 401 in one dimension, otherwise about ML_GRID_BUDGET points in total"""
    if dim == 1:
        return ML_GRID_POINTS_1D
    return max(5, int(round(ML_GRID_BUDGET ** (1.0 / dim))))


def maximum_likelihood_point(model: ParametricModel, outcomes, povm: Povm, grid_points: Optional[int] = None) -> np.ndarray:
    """Grid search over the bounding box, then local refinement inside the domain"""
    counts = outcome_counts(outcome_indices(outcomes, povm), povm.n_outcomes)

    def negative_log_lik(theta) -> float:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if not domain_contains(model, theta):
            return math.inf
        value = log_likelihood_from_probabilities(born_probabilities(sigma(model, theta), povm), counts)
        return -value

    lower = np.asarray(model.domain.lower)
    upper = np.asarray(model.domain.upper)
    points = grid_points or ml_grid_points(model.dim_param)
    if points < 2:
        raise ValueError("grid_points must be at least 2")
    axes = [np.linspace(lo, hi, points) for lo, hi in zip(lower, upper)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, model.dim_param)
    values = np.array([negative_log_lik(theta) for theta in grid])
    if not np.any(np.isfinite(values)):
        raise ValueError(f"{model.model_id}: likelihood vanishes on the whole grid")
    best = grid[int(np.argmin(values))]

    if model.dim_param == 1:
        spacing = (upper[0] - lower[0]) / (points - 1)
        bounds = (max(lower[0], best[0] - spacing), min(upper[0], best[0] + spacing))
        result = minimize_scalar(negative_log_lik, bounds=bounds, method="bounded", options={"xatol": 1e-10})
        refined = np.array([result.x])
    else:
        result = minimize(negative_log_lik, best, method="Nelder-Mead", options={"xatol": 1e-9, "fatol": 1e-12})
        refined = np.asarray(result.x, dtype=float)

    if negative_log_lik(refined) <= negative_log_lik(best):
        return refined
    return best


def qaic_ll(model: ParametricModel, outcomes, povm: Povm, theta_hat, hessians: FisherReport) -> float:
    """-(1/n) sum_i log p(x_i|theta_hat) + (d + Tr(J^Q I^-1)) / (2n)

    Raises:
        SingularHessian: if I at theta_hat is not positive definite
    """
    indices = outcome_indices(outcomes, povm)
    n = len(indices)
    if n == 0:
        raise ValueError("qaic_ll needs at least one observation")
    fisher = hessians.I
    eigenvalues = np.linalg.eigvalsh(0.5 * (fisher + fisher.T))
    if eigenvalues.min() <= 0 or eigenvalues.max() / eigenvalues.min() >= 1e8:
        raise SingularHessian(f"Fisher matrix at theta_hat is not positive definite (eigenvalues {eigenvalues})")
    probs = born_probabilities(sigma(model, theta_hat), povm)
    log_lik = log_likelihood_from_probabilities(probs, outcome_counts(indices, povm.n_outcomes))
    penalty = (model.dim_param + float(np.trace(hessians.J_q @ np.linalg.inv(fisher)))) / (2.0 * n)
    return -log_lik / n + penalty


def _optional_qaic(model, outcomes, povm, eigen_floor) -> Optional[float]:
    theta_hat = maximum_likelihood_point(model, outcomes, povm)
    try:
        hessians = numerical_hessians(model, sigma(model, theta_hat), povm, theta0=theta_hat, eigen_floor=eigen_floor)
        return qaic_ll(model, outcomes, povm, theta_hat, hessians)
    except (BoundaryTooClose, NonFiniteDerivative, SingularHessian) as e:
        logger.warning(f"{model.model_id}: QAIC_LL unavailable at theta_hat={theta_hat.tolist()}: {e}")
        return math.nan


def evaluate_criteria(
    model: ParametricModel,
    samples: PosteriorSamples,
    outcomes,
    scheme: PauliShadowScheme,
    rho_true,
    with_qaic: bool = False,
    eigen_floor: float = DEFAULT_EIGEN_FLOOR,
) -> CriteriaReport:
    """All criteria for one dataset and one chain."""
    indices = outcome_indices(outcomes, scheme.povm)
    sigma_b = bayes_mean_state(model, samples)
    snapshot_stack = snapshots_for(indices, scheme)
    state_weighted_log_variance(samples, rho_true)

    g_n_q = quantum_generalization_loss(rho_true, sigma_b, eigen_floor)
    t_n_q = quantum_training_loss(snapshot_stack, sigma_b, eigen_floor)
    c_value = c_n_q(model, samples, indices, snapshot_stack, scheme.povm)
    g_n, t_n, waic = classical_losses(model, samples, indices, scheme.povm, born_probabilities(rho_true, scheme.povm))

    return CriteriaReport(
        n=len(indices),
        g_n_q=g_n_q,
        t_n_q=t_n_q,
        c_n_q=c_value,
        qwaic=qwaic(t_n_q, c_value),
        g_n=g_n,
        t_n=t_n,
        waic=waic,
        qaic_ll=_optional_qaic(model, indices, scheme.povm, eigen_floor) if with_qaic else None,
    )
