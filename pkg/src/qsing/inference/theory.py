"""
Average log loss functions K, K^Q and finite-difference Fisher/Hessian
matrices at the optimal parameter.

    K(theta)   = sum_x q(x) log p(x|theta0) / p(x|theta),   q = Born(rho)
    K^Q(theta) = Tr rho (log sigma(theta0) - log sigma(theta))
    J, J^Q     = Hessians of K, K^Q at theta0
    I          = sum_x q(x) grad log p grad log p^T
    I^Q        = Re Tr(rho d_i log sigma d_j log sigma)

Derivatives are central differences with one Richardson level; the default
step is 1e-4 of the domain width in each coordinate.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ..quantum.hermitian_linalg import DEFAULT_EIGEN_FLOOR, matrix_log, trace_product
from ..quantum.quantum_core import Povm, SupportViolation, born_probabilities
from ..quantum.shadows import PauliShadowScheme
from .models import (
    ParametricModel,
    UnknownModelError,
    canonical_model_id,
    domain_contains,
    get_model,
    sigma,
    true_state,
)

logger = logging.getLogger(__name__)

DEFAULT_RELATIVE_STEP = 1e-4
# Finite differences carry ~1e-8 relative noise, so a larger condition
# number cannot be told apart from an exactly singular Hessian.
MAX_CONDITION = 1e6
VANISHING_HESSIAN = 1e-6
REPORTED_REL_TOL = 1e-2


class BoundaryTooClose(ValueError):
    """Raised when the difference stencil would leave the parameter domain"""
    pass


class NonFiniteDerivative(ArithmeticError):
    """Raised when a finite difference produces inf or nan"""
    pass


class SingularHessian(ArithmeticError):
    """Raised when J is not safely invertible"""
    pass


class RegularCoefficients(NamedTuple):
    lambda_q: float
    nu_q: float
    nu_prime_q: float


@dataclass(frozen=True)
class FisherReport:
    theta0: np.ndarray
    I: np.ndarray
    J: np.ndarray
    I_q: np.ndarray
    J_q: np.ndarray
    fd_step: np.ndarray
    lambda_q: Optional[float] = None
    nu_q: Optional[float] = None
    nu_prime_q: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "theta0": self.theta0.tolist(),
            "fd_step": self.fd_step.tolist(),
            "I": self.I.tolist(),
            "J": self.J.tolist(),
            "I_q": self.I_q.tolist(),
            "J_q": self.J_q.tolist(),
            "lambda_q": self.lambda_q,
            "nu_q": self.nu_q,
            "nu_prime_q": self.nu_prime_q,
        }


@dataclass(frozen=True)
class ReferenceConstants:
    """Published constants for a built-in model; every field is optional."""

    model_id: str
    rlct: Optional[float] = None
    singular_fluctuation: Optional[float] = None
    r_cq: Optional[float] = None
    multiplicity: Optional[int] = None
    reported: Dict[str, float] = field(default_factory=dict)
    notes: Tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "rlct": self.rlct,
            "singular_fluctuation": self.singular_fluctuation,
            "r_cq": self.r_cq,
            "multiplicity": self.multiplicity,
            "reported": dict(self.reported),
            "notes": list(self.notes),
        }


_REFERENCE_TABLE: Dict[str, ReferenceConstants] = {
    "ex41_regular": ReferenceConstants(
        model_id="ex41_regular",
        rlct=0.5,
        singular_fluctuation=0.5,
        reported={"lambda_q": 3.0, "nu_prime_q": 3.0, "nu_q": 4.0, "learning_coefficient": 2.0},
        notes=(
            "K^Q = 3K on the whole domain; closed-form J = 4/3 and J^Q = I^Q = 4 at pi/4.",
            "The reported lambda_q = nu'_q = 3, nu_q = 4 do not follow from the trace formulas "
            "(which give 3/2 each); both are shown and mismatches are flagged.",
        ),
    ),
    "ex42_singular": ReferenceConstants(
        model_id="ex42_singular",
        rlct=0.5,
        r_cq=3.0,
        notes=(
            "Optimal set is the pair of lines t1 - t2 = 0 and t1 - t2 = pi/3 (cos^2(2 pi/3) = cos^2(pi/3)), "
            "so J is singular; K = K^Q / 3 everywhere.",
            "C_n^Q is expected near half of r_cq * d / n = 6 / n.",
        ),
    ),
    "sec42_regular": ReferenceConstants(
        model_id="sec42_regular",
        rlct=0.5,
        singular_fluctuation=0.5,
        reported={"J": 1.308, "J_q": 10.565, "two_lambda_q": 8.08},
        notes=("C_n^Q is expected near Tr(J^Q J^-1) / n = 8.08 / n.",),
    ),
    "ex43_quadratic": ReferenceConstants(
        model_id="ex43_quadratic",
        rlct=0.25,
        notes=("K and K^Q both vanish like f^4 with f = t21^2 + t22^2.",),
    ),
    "ex43_cusp": ReferenceConstants(
        model_id="ex43_cusp",
        rlct=5.0 / 48.0,
        multiplicity=1,
        notes=("K and K^Q both vanish like f^4 with f the cuspidal curve (t21^2 - t22^3)^2.",),
    ),
}


def reference(model_id: str) -> ReferenceConstants:
    """Read-only reference constants for a built-in model"""
    key = canonical_model_id(model_id)
    try:
        return _REFERENCE_TABLE[key]
    except KeyError:
        raise UnknownModelError(f"No reference constants for {model_id!r}") from None


def _theta0(model: ParametricModel, theta0) -> np.ndarray:
    return np.asarray(model.theta0 if theta0 is None else theta0, dtype=float)


def eval_K(model: ParametricModel, rho_true, povm: Povm, theta, theta0=None) -> float:
    """Average log loss K(theta) for the true outcome distribution Born(rho_true)"""
    q = born_probabilities(rho_true, povm)
    p = born_probabilities(sigma(model, theta), povm)
    p0 = born_probabilities(sigma(model, _theta0(model, theta0)), povm)
    support = q > 0
    if np.any(p[support] <= 0) or np.any(p0[support] <= 0):
        raise SupportViolation("Model assigns zero probability to an outcome the true state produces")
    return float(np.dot(q[support], np.log(p0[support]) - np.log(p[support])))


def eval_KQ(model: ParametricModel, rho_true, theta, theta0=None, eigen_floor: float = DEFAULT_EIGEN_FLOOR) -> float:
    """Average quantum log loss K^Q(theta) = Tr rho (log sigma(theta0) - log sigma(theta))"""
    log_sigma0 = matrix_log(sigma(model, _theta0(model, theta0)), eigen_floor)
    log_sigma = matrix_log(sigma(model, theta), eigen_floor)
    return trace_product(rho_true, log_sigma0 - log_sigma)


def loss_grid(model: ParametricModel, rho_true, povm: Povm, thetas, theta0=None) -> Tuple[np.ndarray, np.ndarray]:
    """K and K^Q evaluated at every parameter vector in ``thetas``"""
    thetas = np.asarray(thetas, dtype=float).reshape(-1, model.dim_param)
    k = np.array([eval_K(model, rho_true, povm, t, theta0) for t in thetas])
    k_q = np.array([eval_KQ(model, rho_true, t, theta0) for t in thetas])
    return k, k_q


def _default_steps(model: ParametricModel, fd_step) -> np.ndarray:
    if fd_step is None:
        return DEFAULT_RELATIVE_STEP * model.domain.widths
    steps = np.broadcast_to(np.asarray(fd_step, dtype=float), (model.dim_param,)).copy()
    if np.any(steps <= 0):
        raise ValueError("fd_step must be positive")
    return steps


def _check_margin(model: ParametricModel, theta0: np.ndarray, steps: np.ndarray) -> None:
    margin = 2.0 * steps
    for signs in itertools.product((-1.0, 0.0, 1.0), repeat=model.dim_param):
        point = theta0 + np.asarray(signs) * margin
        if not domain_contains(model, point):
            raise BoundaryTooClose(
                f"{model.model_id}: theta0={theta0.tolist()} is within 2*fd_step of the domain boundary"
            )


def _finite(value, what: str):
    if not np.all(np.isfinite(value)):
        raise NonFiniteDerivative(f"Non-finite {what}")
    return value


def _hessian(f: Callable[[np.ndarray], float], x: np.ndarray, h: np.ndarray) -> np.ndarray:
    d = len(x)
    H = np.zeros((d, d))
    f0 = f(x)
    for i in range(d):
        e = np.zeros(d)
        e[i] = h[i]
        H[i, i] = (f(x + e) - 2.0 * f0 + f(x - e)) / h[i] ** 2
    for i, j in itertools.combinations(range(d), 2):
        ei = np.zeros(d)
        ej = np.zeros(d)
        ei[i] = h[i]
        ej[j] = h[j]
        H[i, j] = H[j, i] = (
            f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
        ) / (4.0 * h[i] * h[j])
    return H


def richardson_hessian(f: Callable[[np.ndarray], float], x, h) -> np.ndarray:
    """Central second differences at h and h/2 combined as (4 H(h/2) - H(h)) / 3"""
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    H = (4.0 * _hessian(f, x, h / 2.0) - _hessian(f, x, h)) / 3.0
    return _finite(H, "Hessian")


def richardson_jacobian(f: Callable[[np.ndarray], np.ndarray], x, h) -> np.ndarray:
    """Derivatives of an array-valued f along each coordinate: result[i] = d_i f"""
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)

    def central(step):
        rows = []
        for i in range(len(x)):
            e = np.zeros(len(x))
            e[i] = step[i]
            rows.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2.0 * step[i]))
        return np.stack(rows)

    D = (4.0 * central(h / 2.0) - central(h)) / 3.0
    return _finite(D, "first derivative")


def numerical_hessians(
    model: ParametricModel,
    rho_true,
    povm: Povm,
    theta0=None,
    fd_step=None,
    eigen_floor: float = DEFAULT_EIGEN_FLOOR,
) -> FisherReport:
    """Finite-difference I, J, I^Q, J^Q at theta0 (and the regular coefficients when J is invertible).

    Raises:
        BoundaryTooClose: if theta0 is within 2 * fd_step of the boundary
        NonFiniteDerivative: if any difference quotient is inf or nan
    """
    x0 = _theta0(model, theta0)
    steps = _default_steps(model, fd_step)
    _check_margin(model, x0, steps)

    J = richardson_hessian(lambda t: eval_K(model, rho_true, povm, t, x0), x0, steps)
    J_q = richardson_hessian(lambda t: eval_KQ(model, rho_true, t, x0, eigen_floor), x0, steps)

    q = born_probabilities(rho_true, povm)
    support = q > 0

    def log_probs(t):
        with np.errstate(divide="ignore"):
            return np.log(born_probabilities(sigma(model, t), povm)[support])

    scores = richardson_jacobian(log_probs, x0, steps)        # (d, |support|)
    I = (scores * q[support]) @ scores.T

    dlog = richardson_jacobian(lambda t: matrix_log(sigma(model, t), eigen_floor), x0, steps)  # (d, D, D)
    rho_true = np.asarray(rho_true, dtype=complex)
    I_q = np.einsum("ab,ibc,jca->ij", rho_true, dlog, dlog).real
    I_q = 0.5 * (I_q + I_q.T)

    report = FisherReport(theta0=x0, I=I, J=J, I_q=I_q, J_q=J_q, fd_step=steps)
    try:
        coefficients = regular_coefficients(report)
    except SingularHessian as e:
        logger.info(f"{model.model_id}: {e}")
        return report
    return FisherReport(
        theta0=x0, I=I, J=J, I_q=I_q, J_q=J_q, fd_step=steps,
        lambda_q=coefficients.lambda_q,
        nu_q=coefficients.nu_q,
        nu_prime_q=coefficients.nu_prime_q,
    )


def regular_coefficients(report: FisherReport, max_condition: float = MAX_CONDITION) -> RegularCoefficients:
    """lambda^Q = Tr(J^Q J^-1)/2, nu^Q = Tr(I^Q J^-1)/2, nu'^Q = Tr(J^Q J^-1 I J^-1)/2

    Raises:
        SingularHessian: if cond(J) >= max_condition
    """
    if np.abs(report.J).max() <= VANISHING_HESSIAN:
        raise SingularHessian("J vanishes at theta0")
    with np.errstate(divide="ignore", invalid="ignore"):
        condition = np.linalg.cond(report.J)
    if not np.isfinite(condition) or condition >= max_condition:
        raise SingularHessian(f"J is singular (condition number {condition:.3e})")
    J_inv = np.linalg.inv(report.J)
    return RegularCoefficients(
        lambda_q=0.5 * float(np.trace(report.J_q @ J_inv)),
        nu_q=0.5 * float(np.trace(report.I_q @ J_inv)),
        nu_prime_q=0.5 * float(np.trace(report.J_q @ J_inv @ report.I @ J_inv)),
    )


def learning_coefficient(coefficients: RegularCoefficients) -> float:
    """lambda^Q + nu'^Q - nu^Q, the 1/n coefficient of the expected quantum generalization loss"""
    return coefficients.lambda_q + coefficients.nu_prime_q - coefficients.nu_q


def _computed_quantities(report: FisherReport) -> Dict[str, float]:
    computed: Dict[str, float] = {}
    if report.J.shape == (1, 1):
        computed["J"] = float(report.J[0, 0])
        computed["J_q"] = float(report.J_q[0, 0])
    if report.lambda_q is not None:
        coefficients = RegularCoefficients(report.lambda_q, report.nu_q, report.nu_prime_q)
        computed.update(
            lambda_q=report.lambda_q,
            nu_q=report.nu_q,
            nu_prime_q=report.nu_prime_q,
            two_lambda_q=2.0 * report.lambda_q,
            learning_coefficient=learning_coefficient(coefficients),
        )
    return computed


def theory_summary(
    model_id: str,
    theta: Optional[Sequence[float]] = None,
    fd_step=None,
    scheme: Optional[PauliShadowScheme] = None,
) -> dict:
    """JSON-ready Fisher report, coefficients, reference constants and discrepancy flags"""
    model = get_model(model_id)
    scheme = scheme or PauliShadowScheme.build(1)
    rho_true = true_state(model)
    report = numerical_hessians(model, rho_true, scheme.povm, theta0=theta, fd_step=fd_step)

    notes: List[str] = []
    if report.lambda_q is None:
        notes.append("J is singular at theta0; regular-case coefficients are undefined.")
    try:
        constants = reference(model.model_id)
    except UnknownModelError:
        constants = None

    computed = _computed_quantities(report)
    discrepancies = {}
    if constants is not None:
        for name, reported_value in constants.reported.items():
            if name not in computed:
                continue
            discrepancies[name] = {
                "computed": computed[name],
                "reported": reported_value,
                "flag": not math.isclose(computed[name], reported_value, rel_tol=REPORTED_REL_TOL),
            }

    return {
        "model_id": model.model_id,
        "fisher": report.to_dict(),
        "computed": computed,
        "notes": notes,
        "reference": constants.to_dict() if constants is not None else None,
        "discrepancies": discrepancies,
    }
