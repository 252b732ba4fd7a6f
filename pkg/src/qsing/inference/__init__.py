"""Parametric models, posterior sampling, information criteria and Fisher numerics."""

from .criteria import (
    CriteriaReport,
    c_n_q,
    classical_losses,
    evaluate_criteria,
    functional_variance,
    maximum_likelihood_point,
    qaic_ll,
    quantum_generalization_loss,
    quantum_training_loss,
    qwaic,
)
from .models import (
    OutOfDomain,
    ParameterDomain,
    ParametricModel,
    UnknownModelError,
    get_model,
    list_models,
    log_likelihood,
    log_prior,
    register_model,
    sample_prior,
    sigma,
    true_state,
)
from .posterior import (
    AllProposalsRejected,
    MhConfig,
    PosteriorSamples,
    bayes_mean_state,
    posterior_cov,
    run_mh,
    samples_from_thetas,
)
from .theory import (
    BoundaryTooClose,
    FisherReport,
    NonFiniteDerivative,
    ReferenceConstants,
    SingularHessian,
    eval_K,
    eval_KQ,
    numerical_hessians,
    reference,
    regular_coefficients,
    theory_summary,
)

__all__ = [
    "AllProposalsRejected",
    "BoundaryTooClose",
    "CriteriaReport",
    "FisherReport",
    "MhConfig",
    "NonFiniteDerivative",
    "OutOfDomain",
    "ParameterDomain",
    "ParametricModel",
    "PosteriorSamples",
    "ReferenceConstants",
    "SingularHessian",
    "UnknownModelError",
    "bayes_mean_state",
    "c_n_q",
    "classical_losses",
    "eval_K",
    "eval_KQ",
    "evaluate_criteria",
    "functional_variance",
    "get_model",
    "list_models",
    "log_likelihood",
    "log_prior",
    "maximum_likelihood_point",
    "numerical_hessians",
    "posterior_cov",
    "qaic_ll",
    "quantum_generalization_loss",
    "quantum_training_loss",
    "qwaic",
    "reference",
    "register_model",
    "regular_coefficients",
    "run_mh",
    "sample_prior",
    "samples_from_thetas",
    "sigma",
    "theory_summary",
    "true_state",
]
