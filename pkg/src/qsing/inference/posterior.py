"""
Metropolis-Hastings sampling of p(theta | x^n) and posterior functionals.

The chain is an isotropic Gaussian random walk. During burn-in the step
is scaled by a Robbins-Monro recursion toward ``target_acceptance``; it is
frozen afterwards, so retained samples come from a fixed kernel. Proposals
outside the domain, with an impossible observation, or at a state with an
eigenvalue at the floor are rejected.

Each retained sample carries sigma(theta_s), log sigma(theta_s) and the
outcome probabilities p(x | theta_s) over the whole alphabet, so the loss
functions downstream need no further eigendecompositions.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from ..core.types import ChainDiagnostics
from ..quantum.hermitian_linalg import DEFAULT_EIGEN_FLOOR, RankDeficientState, matrix_log
from ..quantum.quantum_core import Povm, born_probabilities
from .models import (
    ParametricModel,
    domain_contains,
    log_likelihood_from_probabilities,
    log_prior,
    outcome_counts,
    outcome_indices,
    sample_prior,
    sigma,
)

logger = logging.getLogger(__name__)

# Robbins-Monro gain exponent for the burn-in step adaptation
ADAPTATION_DECAY = 0.6
MIN_BURN_IN_ACCEPTANCE = 1e-3
INITIAL_STATE_TRIES = 1000
VARIANCE_TRACE_TOLERANCE = 1e-8


class AllProposalsRejected(RuntimeError):
    """Raised when the chain cannot start or accepts (almost) nothing during burn-in"""
    pass


class MhConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_samples: int = 5000
    burn_in: int = 500
    step_scale: Union[float, List[float]] = 0.05
    adapt_during_burn_in: bool = True
    target_acceptance: float = 0.3
    initial_theta: Optional[List[float]] = None

    @field_validator("n_samples")
    @classmethod
    def _positive_samples(cls, value: int) -> int:
        if value < 1:
            raise ValueError("n_samples must be positive")
        return value

    @field_validator("burn_in")
    @classmethod
    def _nonnegative_burn_in(cls, value: int) -> int:
        if value < 0:
            raise ValueError("burn_in must be nonnegative")
        return value

    @field_validator("step_scale")
    @classmethod
    def _positive_steps(cls, value):
        steps = [value] if isinstance(value, (int, float)) else value
        if not steps or any(not s > 0 for s in steps):
            raise ValueError("step_scale entries must be positive")
        return value

    @field_validator("target_acceptance")
    @classmethod
    def _target_in_unit_interval(cls, value: float) -> float:
        if not 0.0 < value < 1.0:
            raise ValueError("target_acceptance must lie in (0, 1)")
        return value

    @model_validator(mode="after")
    def _burn_in_below_total(self):
        if self.burn_in >= self.n_samples:
            raise ValueError(f"burn_in ({self.burn_in}) must be smaller than n_samples ({self.n_samples})")
        return self

    def step_vector(self, dim: int) -> np.ndarray:
        if isinstance(self.step_scale, (int, float)):
            return np.full(dim, float(self.step_scale))
        if len(self.step_scale) != dim:
            raise ValueError(f"step_scale has {len(self.step_scale)} entries for a {dim}-parameter model")
        return np.asarray(self.step_scale, dtype=float)


@dataclass(frozen=True)
class PosteriorSamples:
    thetas: np.ndarray            # (S, d)
    acceptance_rate: float
    burn_in_acceptance: float
    step_scale: np.ndarray        # (d,) frozen after burn-in
    sigma_cache: np.ndarray       # (S, D, D)
    log_sigma_cache: np.ndarray   # (S, D, D)
    prob_cache: np.ndarray        # (M, S) p(x | theta_s)
    log_lik_cache: np.ndarray     # (M, S) log p(x | theta_s)

    @property
    def n_samples(self) -> int:
        return self.thetas.shape[0]

    def diagnostics(self) -> ChainDiagnostics:
        return ChainDiagnostics(
            acceptance_rate=float(self.acceptance_rate),
            burn_in_acceptance=float(self.burn_in_acceptance),
            step_scale=[float(s) for s in self.step_scale],
        )


@dataclass
class _ChainState:
    theta: np.ndarray
    log_target: float
    sigma: np.ndarray
    log_sigma: np.ndarray
    probs: np.ndarray


def _evaluate(model, theta, counts, povm, eigen_floor) -> Optional[_ChainState]:
    """Chain state at theta, or None when the target density is zero there"""
    if not domain_contains(model, theta):
        return None
    state = sigma(model, theta)
    try:
        log_state = matrix_log(state, eigen_floor)
    except RankDeficientState:
        return None
    probs = born_probabilities(state, povm)
    log_lik = log_likelihood_from_probabilities(probs, counts)
    if not math.isfinite(log_lik):
        return None
    return _ChainState(theta, log_lik + log_prior(model, theta), state, log_state, probs)


def _initial_state(model, config, counts, povm, eigen_floor, rng) -> _ChainState:
    if config.initial_theta is not None:
        state = _evaluate(model, np.asarray(config.initial_theta, dtype=float), counts, povm, eigen_floor)
        if state is None:
            raise AllProposalsRejected(f"{model.model_id}: initial_theta has zero posterior density")
        return state
    for _ in range(INITIAL_STATE_TRIES):
        state = _evaluate(model, sample_prior(model, rng), counts, povm, eigen_floor)
        if state is not None:
            return state
    raise AllProposalsRejected(
        f"{model.model_id}: no prior draw with positive posterior density in {INITIAL_STATE_TRIES} tries"
    )


def run_mh(
    model: ParametricModel,
    outcomes,
    povm: Povm,
    config: MhConfig,
    rng: np.random.Generator,
    eigen_floor: float = DEFAULT_EIGEN_FLOOR,
) -> PosteriorSamples:
    """Sample the posterior pi(theta) prod_i p(x_i | theta).

    Args:
        model: Parametric model (its domain bounds the walk)
        outcomes: Outcome indices or labels, at least one
        povm: Measurement defining p(x | theta)
        config: Chain length, burn-in and proposal settings
        rng: Random stream owned by this chain

    Returns:
        PosteriorSamples with the n_samples - burn_in retained states

    Raises:
        AllProposalsRejected: if burn-in acceptance is below 0.001
    """
    if model.hilbert_dim != povm.dim:
        raise ValueError(f"Model dimension {model.hilbert_dim} does not match POVM dimension {povm.dim}")
    indices = outcome_indices(outcomes, povm)
    if indices.size == 0:
        raise ValueError("run_mh needs at least one outcome")
    counts = outcome_counts(indices, povm.n_outcomes)

    base_step = config.step_vector(model.dim_param)
    log_scale = 0.0
    current = _initial_state(model, config, counts, povm, eigen_floor, rng)

    kept: List[_ChainState] = []
    accepted_burn_in = 0
    accepted_kept = 0
    for t in range(config.n_samples):
        step = base_step * math.exp(log_scale)
        proposal_theta = current.theta + step * rng.standard_normal(model.dim_param)
        log_u = math.log1p(-rng.random())
        proposal = _evaluate(model, proposal_theta, counts, povm, eigen_floor)

        log_alpha = -math.inf if proposal is None else min(0.0, proposal.log_target - current.log_target)
        accepted = log_u < log_alpha
        if accepted:
            current = proposal

        if t < config.burn_in:
            accepted_burn_in += accepted
            if config.adapt_during_burn_in:
                log_scale += (math.exp(log_alpha) - config.target_acceptance) / (t + 1) ** ADAPTATION_DECAY
        else:
            accepted_kept += accepted
            kept.append(current)

    burn_in_acceptance = accepted_burn_in / config.burn_in if config.burn_in else math.nan
    if config.burn_in and burn_in_acceptance < MIN_BURN_IN_ACCEPTANCE:
        raise AllProposalsRejected(
            f"{model.model_id}: burn-in acceptance {burn_in_acceptance:.4f}; check step_scale and the domain"
        )

    acceptance_rate = accepted_kept / len(kept)
    final_step = base_step * math.exp(log_scale)
    logger.debug(
        f"{model.model_id}: acceptance {acceptance_rate:.3f} (burn-in {burn_in_acceptance:.3f}), "
        f"step {np.array2string(final_step, precision=4)}"
    )
    if not 0.1 <= acceptance_rate <= 0.6:
        logger.warning(f"{model.model_id}: post burn-in acceptance {acceptance_rate:.3f} outside [0.1, 0.6]")

    return _assemble(kept, acceptance_rate, burn_in_acceptance, final_step)


def _assemble(states: Sequence[_ChainState], acceptance_rate, burn_in_acceptance, step) -> PosteriorSamples:
    probs = np.stack([s.probs for s in states], axis=1)
    with np.errstate(divide="ignore"):
        log_probs = np.log(probs)
    return PosteriorSamples(
        thetas=np.stack([s.theta for s in states]),
        acceptance_rate=acceptance_rate,
        burn_in_acceptance=burn_in_acceptance,
        step_scale=np.asarray(step, dtype=float),
        sigma_cache=np.stack([s.sigma for s in states]),
        log_sigma_cache=np.stack([s.log_sigma for s in states]),
        prob_cache=probs,
        log_lik_cache=log_probs,
    )


def samples_from_thetas(
    model: ParametricModel,
    thetas,
    povm: Povm,
    eigen_floor: float = DEFAULT_EIGEN_FLOOR,
) -> PosteriorSamples:
    """PosteriorSamples with full caches for a fixed list of parameters.

    Acceptance fields are NaN: there is no chain behind these samples.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    if thetas.shape[0] == 0:
        raise ValueError("Need at least one parameter vector")
    states = []
    for theta in thetas:
        state = sigma(model, theta)
        states.append(
            _ChainState(theta, math.nan, state, matrix_log(state, eigen_floor), born_probabilities(state, povm))
        )
    return _assemble(states, math.nan, math.nan, np.zeros(model.dim_param))


def thin(samples: PosteriorSamples, k: int) -> PosteriorSamples:
    """Keep every k-th retained sample"""
    if k < 1:
        raise ValueError("Thinning factor must be positive")
    return PosteriorSamples(
        thetas=samples.thetas[::k],
        acceptance_rate=samples.acceptance_rate,
        burn_in_acceptance=samples.burn_in_acceptance,
        step_scale=samples.step_scale,
        sigma_cache=samples.sigma_cache[::k],
        log_sigma_cache=samples.log_sigma_cache[::k],
        prob_cache=samples.prob_cache[:, ::k],
        log_lik_cache=samples.log_lik_cache[:, ::k],
    )


def bayes_mean_state(model: ParametricModel, samples: PosteriorSamples) -> np.ndarray:
    """sigma_B = (1/S) sum_s sigma(theta_s), the posterior predictive state"""
    if samples.n_samples == 0:
        raise ValueError("No posterior samples")
    if samples.sigma_cache.shape[-1] != model.hilbert_dim:
        raise ValueError(f"Samples do not belong to {model.model_id} (dimension {model.hilbert_dim})")
    mean = samples.sigma_cache.mean(axis=0)
    return 0.5 * (mean + mean.conj().T)


def posterior_matrix_mean_log(samples: PosteriorSamples) -> np.ndarray:
    """E_theta[log sigma(theta)]"""
    mean = samples.log_sigma_cache.mean(axis=0)
    return 0.5 * (mean + mean.conj().T)


def posterior_matrix_var_log(samples: PosteriorSamples) -> np.ndarray:
    """V_theta[log sigma] = E_theta[(log sigma)^2] - E_theta[log sigma]^2"""
    logs = samples.log_sigma_cache
    second_moment = (logs @ logs).mean(axis=0)
    mean = logs.mean(axis=0)
    var = second_moment - mean @ mean
    return 0.5 * (var + var.conj().T)


def state_weighted_log_variance(samples: PosteriorSamples, rho, tolerance: float = VARIANCE_TRACE_TOLERANCE) -> float:
    """Tr(rho V_theta[log sigma]); a value below -tolerance is logged as a warning"""
    value = float(np.real(np.trace(np.asarray(rho, dtype=complex) @ posterior_matrix_var_log(samples))))
    if value < -tolerance:
        logger.warning(f"Tr(rho V_theta[log sigma]) = {value:.3e} is negative beyond {tolerance:g}")
    return value


def posterior_cov(samples: PosteriorSamples, f_values, g_values) -> Union[float, np.ndarray]:
    """mean(f g) - mean(f) mean(g) over the last axis (the sample axis)"""
    f = np.asarray(f_values, dtype=float)
    g = np.asarray(g_values, dtype=float)
    if f.shape != g.shape:
        raise ValueError(f"Length mismatch: {f.shape} vs {g.shape}")
    if f.shape[-1] != samples.n_samples:
        raise ValueError(f"Expected {samples.n_samples} values per sample axis, got {f.shape[-1]}")
    cov = (f * g).mean(axis=-1) - f.mean(axis=-1) * g.mean(axis=-1)
    return float(cov) if np.ndim(cov) == 0 else cov


def posterior_mean_theta(samples: PosteriorSamples) -> np.ndarray:
    return samples.thetas.mean(axis=0)


def monte_carlo_stderr(samples: PosteriorSamples, n_batches: int = 20) -> np.ndarray:
    """Batch-means standard error of the posterior mean of theta"""
    usable = (samples.n_samples // n_batches) * n_batches
    if usable == 0:
        raise ValueError(f"Need at least {n_batches} samples for batch means")
    batches = samples.thetas[:usable].reshape(n_batches, -1, samples.thetas.shape[1]).mean(axis=1)
    return batches.std(axis=0, ddof=1) / math.sqrt(n_batches)
