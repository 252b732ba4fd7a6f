"""
Parametric state models sigma(theta) on compact parameter domains, and the
registry of built-in one-qubit examples.

Built-ins (all 2x2):
    ex41_regular    diag(cos^2 t, sin^2 t) on [0, pi/2], rho = I/2
    ex42_singular   diag(cos^2(t1 - t2 + pi/3), sin^2(...)), rho = sigma(0, 0)
    sec42_regular   lightly depolarized |phi(t)><phi(t)|, rho = sigma(pi/4)
    ex43_quadratic  depolarizing family with f = t21^2 + t22^2, rho = I/2
    ex43_cusp       depolarizing family with f = (t21^2 - t22^3)^2, rho = I/2
"""

import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..quantum.quantum_core import Povm, as_density_matrix, born_probabilities

logger = logging.getLogger(__name__)

# log p below this counts as an impossible observation
MIN_PROBABILITY = 1e-300

SigmaFn = Callable[[np.ndarray], np.ndarray]
ConstraintFn = Callable[[np.ndarray], bool]
LogPriorFn = Callable[[np.ndarray], float]


class OutOfDomain(ValueError):
    """Raised when a parameter vector lies outside the model domain"""
    pass


class UnknownModelError(KeyError):
    """Raised when a model id is not registered"""
    pass


@dataclass(frozen=True)
class ParameterDomain:
    """Closed box with an optional extra constraint on theta."""

    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    constraint: Optional[ConstraintFn] = None
    volume_override: Optional[float] = None

    def __post_init__(self):
        if len(self.lower) != len(self.upper) or not self.lower:
            raise ValueError("Domain bounds must be non-empty and of equal length")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError(f"Empty box: {self.lower} .. {self.upper}")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def widths(self) -> np.ndarray:
        return np.asarray(self.upper) - np.asarray(self.lower)

    @property
    def volume(self) -> float:
        if self.volume_override is not None:
            return self.volume_override
        return float(np.prod(self.widths))

    def contains(self, theta) -> bool:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise ValueError(f"Expected a parameter vector of length {self.dim}, got shape {theta.shape}")
        if not np.all(np.isfinite(theta)):
            return False
        if np.any(theta < np.asarray(self.lower)) or np.any(theta > np.asarray(self.upper)):
            return False
        return self.constraint is None or bool(self.constraint(theta))


@dataclass(frozen=True)
class ParametricModel:
    model_id: str
    dim_param: int
    hilbert_dim: int
    domain: ParameterDomain
    sigma_fn: SigmaFn = field(repr=False)
    theta0: Tuple[float, ...]
    true_theta: Tuple[float, ...]
    description: str = ""
    log_prior_fn: Optional[LogPriorFn] = field(default=None, repr=False)

    def __post_init__(self):
        if self.domain.dim != self.dim_param:
            raise ValueError(f"Domain has dimension {self.domain.dim}, model declares {self.dim_param}")
        for name in ("theta0", "true_theta"):
            if len(getattr(self, name)) != self.dim_param:
                raise ValueError(f"{name} must have length {self.dim_param}")


def domain_contains(model: ParametricModel, theta) -> bool:
    """Box membership and the extra constraint"""
    return model.domain.contains(theta)


def sigma(model: ParametricModel, theta) -> np.ndarray:
    """Model state at theta.

    Raises:
        OutOfDomain: if theta is outside the domain
    """
    theta = np.asarray(theta, dtype=float)
    if not domain_contains(model, theta):
        raise OutOfDomain(f"{model.model_id}: theta={theta.tolist()} is outside the domain")
    return as_density_matrix(model.sigma_fn(theta))


def true_state(model: ParametricModel, theta: Optional[Sequence[float]] = None) -> np.ndarray:
    """rho = sigma(theta_true) (or sigma(theta) for an explicit model point)"""
    return sigma(model, model.true_theta if theta is None else theta)


def log_prior(model: ParametricModel, theta) -> float:
    """Uniform over the domain unless the model supplies its own prior"""
    theta = np.asarray(theta, dtype=float)
    if not domain_contains(model, theta):
        return -math.inf
    if model.log_prior_fn is not None:
        return float(model.log_prior_fn(theta))
    return -math.log(model.domain.volume)


def sample_prior(model: ParametricModel, rng: np.random.Generator, max_tries: int = 10000) -> np.ndarray:
    """Uniform draw from the domain by rejection in the bounding box"""
    lower = np.asarray(model.domain.lower)
    widths = model.domain.widths
    for _ in range(max_tries):
        theta = lower + widths * rng.random(model.dim_param)
        if domain_contains(model, theta):
            return theta
    raise OutOfDomain(f"{model.model_id}: no prior draw landed in the domain after {max_tries} tries")


def outcome_indices(outcomes, povm: Povm) -> np.ndarray:
    """Map outcome labels or indices to an integer index array"""
    outcomes = list(outcomes) if not isinstance(outcomes, np.ndarray) else outcomes
    if len(outcomes) == 0:
        return np.zeros(0, dtype=int)
    if isinstance(outcomes, np.ndarray) and np.issubdtype(outcomes.dtype, np.integer):
        indices = outcomes.astype(int)
    else:
        lookup = {label: i for i, label in enumerate(povm.labels)}
        try:
            indices = np.array(
                [o if isinstance(o, (int, np.integer)) else lookup[str(o).replace("−", "-")] for o in outcomes],
                dtype=int,
            )
        except KeyError as e:
            raise ValueError(f"Unknown outcome label {e.args[0]!r}") from None
    if indices.min() < 0 or indices.max() >= povm.n_outcomes:
        raise ValueError("Outcome index out of range for the POVM")
    return indices


def outcome_counts(outcomes, n_outcomes: int) -> np.ndarray:
    """Counts per alphabet symbol"""
    return np.bincount(np.asarray(outcomes, dtype=int), minlength=n_outcomes)


def log_likelihood_from_probabilities(probs: np.ndarray, counts: np.ndarray) -> float:
    """sum_x counts[x] log p(x); -inf if an observed outcome is (numerically) impossible"""
    observed = counts > 0
    if np.any(probs[observed] <= MIN_PROBABILITY):
        return -math.inf
    return float(np.dot(counts[observed], np.log(probs[observed])))


def log_likelihood(model: ParametricModel, theta, outcomes, povm: Povm) -> float:
    """sum_i log Tr(Pi_{x_i} sigma(theta))"""
    if model.hilbert_dim != povm.dim:
        raise ValueError(f"Model dimension {model.hilbert_dim} does not match POVM dimension {povm.dim}")
    indices = outcome_indices(outcomes, povm)
    if indices.size == 0:
        return 0.0
    probs = born_probabilities(sigma(model, theta), povm)
    return log_likelihood_from_probabilities(probs, outcome_counts(indices, povm.n_outcomes))


# --- built-in state families -------------------------------------------------

DEPOLARIZED_WEIGHT = math.cos(math.pi / 32) ** 2


def _diagonal_qubit(angle: float) -> np.ndarray:
    c = math.cos(angle) ** 2
    return np.array([[c, 0.0], [0.0, 1.0 - c]], dtype=complex)


def _direction_projector(angle: float) -> np.ndarray:
    phi = np.array([math.cos(angle), math.sin(angle)], dtype=complex)
    return np.outer(phi, phi.conj())


def _ex41_sigma(theta: np.ndarray) -> np.ndarray:
    return _diagonal_qubit(theta[0])


def _ex42_sigma(theta: np.ndarray) -> np.ndarray:
    return _diagonal_qubit(theta[0] - theta[1] + math.pi / 3)


def _ex42_constraint(theta: np.ndarray) -> bool:
    return -math.pi / 3 <= theta[0] - theta[1] <= math.pi / 2


def _sec42_sigma(theta: np.ndarray) -> np.ndarray:
    return DEPOLARIZED_WEIGHT * _direction_projector(theta[0]) + (1.0 - DEPOLARIZED_WEIGHT) * np.eye(2) / 2.0


def quadratic_sum(t2: np.ndarray) -> float:
    return float(np.sum(np.square(t2)))


def cusp(t2: np.ndarray) -> float:
    return float((t2[0] ** 2 - t2[1] ** 3) ** 2)


def _depolarized_family_sigma(theta: np.ndarray, f: Callable[[np.ndarray], float]) -> np.ndarray:
    # g is the identity on theta_1
    s = math.sin(f(theta[1:])) ** 2
    return s * _direction_projector(theta[0]) + (1.0 - s) * np.eye(2) / 2.0


_REGISTRY: Dict[str, Callable[[], ParametricModel]] = {}
_ALIASES = {
    "ex43_depol:quadratic": "ex43_quadratic",
    "ex43_depol:cusp": "ex43_cusp",
}


def register_model(model_id: str):
    """Decorator registering a zero-argument factory under ``model_id``."""

    def decorator(factory: Callable[[], ParametricModel]):
        if model_id in _REGISTRY:
            logger.warning(f"Replacing registered model {model_id}")
        _REGISTRY[model_id] = factory
        return factory

    return decorator


def list_models() -> List[str]:
    return sorted(_REGISTRY)


def canonical_model_id(model_id: str) -> str:
    """Resolve ``ex43_depol:<variant>`` aliases to registry ids"""
    return _ALIASES.get(model_id, model_id)


def get_model(model_id: str) -> ParametricModel:
    """Build a registered model by id (``ex43_depol:<variant>`` aliases accepted)."""
    try:
        factory = _REGISTRY[canonical_model_id(model_id)]
    except KeyError:
        raise UnknownModelError(f"Unknown model id {model_id!r}; known: {', '.join(list_models())}") from None
    return factory()


@register_model("ex41_regular")
def _ex41_regular() -> ParametricModel:
    return ParametricModel(
        model_id="ex41_regular",
        dim_param=1,
        hilbert_dim=2,
        domain=ParameterDomain(lower=(0.0,), upper=(math.pi / 2,)),
        sigma_fn=_ex41_sigma,
        theta0=(math.pi / 4,),
        true_theta=(math.pi / 4,),
        description="regular classical model diag(cos^2 t, sin^2 t), rho = I/2",
    )


@register_model("ex42_singular")
def _ex42_singular() -> ParametricModel:
    return ParametricModel(
        model_id="ex42_singular",
        dim_param=2,
        hilbert_dim=2,
        domain=ParameterDomain(
            lower=(-math.pi, -math.pi - math.pi / 2),
            upper=(math.pi, math.pi + math.pi / 3),
            constraint=_ex42_constraint,
            # theta_1 spans 2 pi and each slice in theta_2 has length 5 pi / 6
            volume_override=5.0 * math.pi ** 2 / 3.0,
        ),
        sigma_fn=_ex42_sigma,
        theta0=(0.0, 0.0),
        true_theta=(0.0, 0.0),
        description="singular classical model depending on t1 - t2 only, rho = sigma(0, 0)",
    )


@register_model("sec42_regular")
def _sec42_regular() -> ParametricModel:
    return ParametricModel(
        model_id="sec42_regular",
        dim_param=1,
        hilbert_dim=2,
        domain=ParameterDomain(lower=(0.0,), upper=(math.pi / 2,)),
        sigma_fn=_sec42_sigma,
        theta0=(math.pi / 4,),
        true_theta=(math.pi / 4,),
        description="regular quantum model, |phi(t)><phi(t)| with weak depolarizing noise, rho = sigma(pi/4)",
    )


def _depolarized_family(model_id: str, f: Callable[[np.ndarray], float], label: str) -> ParametricModel:
    return ParametricModel(
        model_id=model_id,
        dim_param=3,
        hilbert_dim=2,
        domain=ParameterDomain(lower=(0.0, -0.5, -0.5), upper=(math.pi, 0.5, 0.5)),
        sigma_fn=partial(_depolarized_family_sigma, f=f),
        theta0=(math.pi / 4, 0.0, 0.0),
        true_theta=(math.pi / 4, 0.0, 0.0),
        description=f"depolarizing family sin^2(f)|phi(t1)><phi(t1)| + cos^2(f) I/2 with f = {label}, rho = I/2",
    )


@register_model("ex43_quadratic")
def _ex43_quadratic() -> ParametricModel:
    return _depolarized_family("ex43_quadratic", quadratic_sum, "t21^2 + t22^2")


@register_model("ex43_cusp")
def _ex43_cusp() -> ParametricModel:
    return _depolarized_family("ex43_cusp", cusp, "(t21^2 - t22^3)^2")
