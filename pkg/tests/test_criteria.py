"""
Tests for quantum and classical losses and the information criteria
"""

import logging
import math

import numpy as np
import pytest

from qsing.inference.criteria import (
    CriteriaReport,
    c_n_q,
    classical_losses,
    evaluate_criteria,
    functional_variance,
    maximum_likelihood_point,
    ml_grid_points,
    qaic_ll,
    quantum_generalization_loss,
    quantum_training_loss,
    qwaic,
)
from qsing.inference.models import sigma, true_state
from qsing.inference.posterior import MhConfig, PosteriorSamples, run_mh, samples_from_thetas
from qsing.inference.theory import FisherReport, SingularHessian, numerical_hessians
from qsing.quantum.hermitian_linalg import matrix_log, trace_product
from qsing.quantum.quantum_core import (
    SupportViolation,
    born_probabilities,
    quantum_relative_entropy,
    random_density_matrix,
    von_neumann_entropy,
)
from qsing.quantum.shadows import sample_outcomes, snapshots_for


def fisher_report(i_matrix, j_q_matrix):
    i_matrix = np.atleast_2d(np.asarray(i_matrix, dtype=float))
    return FisherReport(
        theta0=np.zeros(len(i_matrix)),
        I=i_matrix,
        J=i_matrix,
        I_q=np.asarray(j_q_matrix, dtype=float),
        J_q=np.atleast_2d(np.asarray(j_q_matrix, dtype=float)),
        fd_step=np.full(len(i_matrix), 1e-4),
    )


class TestQuantumLosses:
    """Tests for G_n^Q and T_n^Q"""

    def test_generalization_loss_at_maximally_mixed_prediction(self, random_states):
        for rho in random_states:
            assert quantum_generalization_loss(rho, np.eye(2) / 2) == pytest.approx(math.log(2), abs=1e-12)

    def test_generalization_loss_at_pi_over_8(self, ex41_model, maximally_mixed):
        sigma_b = sigma(ex41_model, [math.pi / 8])
        assert quantum_generalization_loss(maximally_mixed, sigma_b) == pytest.approx(1.5 * math.log(2), abs=1e-12)

    def test_generalization_minus_entropy_is_relative_entropy(self, rng):
        for _ in range(10):
            rho = random_density_matrix(2, rng)
            sigma_b = random_density_matrix(2, rng)
            gap = quantum_generalization_loss(rho, sigma_b) - von_neumann_entropy(rho)
            assert gap == pytest.approx(quantum_relative_entropy(rho, sigma_b), abs=1e-10)

    def test_training_loss_at_maximally_mixed_prediction(self, pauli_scheme):
        snaps = snapshots_for([0, 3, 5, 5, 1], pauli_scheme)
        assert quantum_training_loss(snaps, np.eye(2) / 2) == pytest.approx(math.log(2), abs=1e-12)

    def test_training_loss_can_be_negative(self):
        value = quantum_training_loss(np.array([np.diag([2.0, -1.0])]), np.diag([0.75, 0.25]))
        assert value == pytest.approx(-0.81093, abs=1e-5)

    def test_exact_enumeration_matches_generalization(self, pauli_scheme, rng):
        rho = random_density_matrix(2, rng)
        sigma_b = random_density_matrix(2, rng)
        probs = born_probabilities(rho, pauli_scheme.povm)
        expected_snapshot = np.einsum("m,mij->ij", probs, pauli_scheme.snapshot_table)
        training = quantum_training_loss(expected_snapshot[None], sigma_b)
        assert training == pytest.approx(quantum_generalization_loss(rho, sigma_b), abs=1e-12)


class TestCnQ:
    """Tests for the quantum covariance penalty"""

    def test_zero_for_degenerate_posterior(self, ex41_model, pauli_scheme):
        samples = samples_from_thetas(ex41_model, [[0.4]] * 4, pauli_scheme.povm)
        outcomes = [0, 1, 2, 4]
        value = c_n_q(ex41_model, samples, outcomes, snapshots_for(outcomes, pauli_scheme), pauli_scheme.povm)
        assert value == pytest.approx(0.0, abs=1e-14)

    def test_grouping_matches_per_observation_sum(self, ex41_model, pauli_scheme):
        thetas = [[0.3], [0.6], [0.9], [1.1]]
        samples = samples_from_thetas(ex41_model, thetas, pauli_scheme.povm)
        outcomes = [0, 0, 2, 5, 1, 2, 0]
        snaps = snapshots_for(outcomes, pauli_scheme)

        states = [sigma(ex41_model, t) for t in thetas]
        terms = []
        for x, snap in zip(outcomes, snaps):
            classical = np.array([math.log(born_probabilities(s, pauli_scheme.povm)[x]) for s in states])
            quantum = np.array([trace_product(snap, matrix_log(s)) for s in states])
            terms.append(np.mean(classical * quantum) - classical.mean() * quantum.mean())

        value = c_n_q(ex41_model, samples, outcomes, snaps, pauli_scheme.povm)
        assert value == pytest.approx(np.mean(terms), abs=1e-12)

    def test_accepts_snapshot_objects_and_labels(self, ex41_model, pauli_scheme):
        from qsing.quantum.shadows import snapshot

        samples = samples_from_thetas(ex41_model, [[0.3], [0.8]], pauli_scheme.povm)
        labels = ["Z+", "X-", "Z−"]
        by_objects = c_n_q(ex41_model, samples, labels, [snapshot(l, pauli_scheme) for l in labels], pauli_scheme.povm)
        by_stack = c_n_q(ex41_model, samples, [0, 3, 1], snapshots_for([0, 3, 1], pauli_scheme), pauli_scheme.povm)
        assert by_objects == pytest.approx(by_stack, abs=1e-15)

    def test_length_mismatch(self, ex41_model, pauli_scheme):
        samples = samples_from_thetas(ex41_model, [[0.3], [0.8]], pauli_scheme.povm)
        with pytest.raises(ValueError, match="snapshots"):
            c_n_q(ex41_model, samples, [0, 1], snapshots_for([0], pauli_scheme), pauli_scheme.povm)

    def test_qwaic_is_training_plus_penalty(self):
        assert qwaic(0.7, 0.01) == pytest.approx(0.71)


class TestClassicalLosses:
    """Tests for G_n, T_n and WAIC"""

    def test_concentrated_posterior_at_uniform_prediction(self, ex41_model, pauli_scheme):
        samples = samples_from_thetas(ex41_model, [[math.pi / 4]] * 3, pauli_scheme.povm)
        q = np.full(6, 1 / 6)
        g_n, t_n, waic = classical_losses(ex41_model, samples, [0, 1, 1, 4], pauli_scheme.povm, q)
        assert g_n == pytest.approx(math.log(6), abs=1e-12)
        assert t_n == pytest.approx(math.log(6), abs=1e-12)
        assert waic == pytest.approx(t_n, abs=1e-14)

    def test_functional_variance_uses_population_variance(self, ex41_model, pauli_scheme):
        samples = samples_from_thetas(ex41_model, [[0.3], [0.9]], pauli_scheme.povm)
        log_p = np.log([born_probabilities(sigma(ex41_model, [t]), pauli_scheme.povm)[0] for t in (0.3, 0.9)])
        assert functional_variance(samples, [0, 2]) == pytest.approx(np.var(log_p) / 2, abs=1e-14)

    def test_waic_not_below_training_loss(self, ex41_model, pauli_scheme):
        samples = samples_from_thetas(ex41_model, [[0.3], [0.6], [1.2]], pauli_scheme.povm)
        q = born_probabilities(np.eye(2) / 2, pauli_scheme.povm)
        _, t_n, waic = classical_losses(ex41_model, samples, [0, 1, 2, 3, 5], pauli_scheme.povm, q)
        assert waic >= t_n

    def test_support_violation(self, ex41_model, pauli_scheme):
        probs = np.tile(np.array([1 / 3, 0.0, 1 / 6, 1 / 6, 1 / 6, 1 / 6])[:, None], (1, 2))
        with np.errstate(divide="ignore"):
            log_probs = np.log(probs)
        samples = PosteriorSamples(
            thetas=np.zeros((2, 1)),
            acceptance_rate=math.nan,
            burn_in_acceptance=math.nan,
            step_scale=np.zeros(1),
            sigma_cache=np.stack([np.diag([1.0, 0.0])] * 2),
            log_sigma_cache=np.zeros((2, 2, 2)),
            prob_cache=probs,
            log_lik_cache=log_probs,
        )
        with pytest.raises(SupportViolation):
            classical_losses(ex41_model, samples, [0], pauli_scheme.povm, np.full(6, 1 / 6))

    def test_q_true_shape_checked(self, ex41_model, pauli_scheme):
        samples = samples_from_thetas(ex41_model, [[0.5]], pauli_scheme.povm)
        with pytest.raises(ValueError, match="q_true"):
            classical_losses(ex41_model, samples, [0], pauli_scheme.povm, [0.5, 0.5])


class TestQaicLL:
    """Tests for the maximum-likelihood criterion"""

    def test_maximum_likelihood_point(self, ex41_model, pauli_scheme):
        outcomes = ["Z+"] * 30 + ["Z-"] * 10 + ["X+"] * 7
        theta_hat = maximum_likelihood_point(ex41_model, outcomes, pauli_scheme.povm)
        assert theta_hat[0] == pytest.approx(math.pi / 6, abs=1e-6)

    def test_grid_points_per_axis(self):
        assert [ml_grid_points(d) for d in (1, 2, 3)] == [401, 61, 15]

    def test_three_parameter_search_stays_cheap(self, pauli_scheme, maximally_mixed, mocker):
        import qsing.inference.criteria as criteria_module
        from qsing.inference.models import domain_contains, get_model

        model = get_model("ex43_quadratic")
        outcomes = sample_outcomes(maximally_mixed, pauli_scheme, 300, np.random.default_rng(5))
        spy = mocker.spy(criteria_module, "sigma")
        theta_hat = maximum_likelihood_point(model, outcomes, pauli_scheme.povm)
        assert domain_contains(model, theta_hat)
        assert spy.call_count < 10000

    def test_penalty_is_one_over_n_when_fisher_matches(self, ex41_model, pauli_scheme):
        outcomes = [0, 1, 2, 3, 4, 5]
        value = qaic_ll(ex41_model, outcomes, pauli_scheme.povm, [math.pi / 4], fisher_report([[2.0]], [[2.0]]))
        assert value == pytest.approx(math.log(6) + 1 / 6, abs=1e-12)

    def test_indefinite_fisher_rejected(self, ex41_model, pauli_scheme):
        with pytest.raises(SingularHessian):
            qaic_ll(ex41_model, [0, 1], pauli_scheme.povm, [math.pi / 4], fisher_report([[-1.0]], [[1.0]]))

    def test_sec42_penalty(self, sec42_model, pauli_scheme):
        c = math.cos(math.pi / 32) ** 2
        ratio = 2 * c * math.log((1 + c) / (1 - c)) / (4 * c ** 2 / 3)
        rho = true_state(sec42_model)
        hessians = numerical_hessians(sec42_model, rho, pauli_scheme.povm)
        outcomes = [0, 1, 2, 3, 4, 5] * 10
        theta0 = sec42_model.theta0
        log_lik = np.log(born_probabilities(sigma(sec42_model, theta0), pauli_scheme.povm)).sum() * 10
        penalty = qaic_ll(sec42_model, outcomes, pauli_scheme.povm, theta0, hessians) + log_lik / 60
        assert penalty == pytest.approx((1 + ratio) / 120, rel=1e-3)


class TestEvaluateCriteria:
    """End-to-end criteria on a short chain"""

    @pytest.fixture
    def report(self, ex41_model, pauli_scheme, maximally_mixed, small_mh_config):
        outcomes = sample_outcomes(maximally_mixed, pauli_scheme, 500, np.random.default_rng(21))
        samples = run_mh(ex41_model, outcomes, pauli_scheme.povm, small_mh_config, np.random.default_rng(22))
        return evaluate_criteria(ex41_model, samples, outcomes, pauli_scheme, maximally_mixed, with_qaic=True)

    def test_report_fields(self, report):
        assert isinstance(report, CriteriaReport)
        assert report.n == 500
        assert report.qwaic == pytest.approx(report.t_n_q + report.c_n_q)
        assert set(report.as_dict()) >= {"g_n_q", "qwaic", "waic", "qaic_ll"}

    def test_losses_bounded_below_by_entropy(self, report):
        assert report.g_n_q >= math.log(2) - 1e-12
        assert report.g_n >= math.log(6) - 1e-12
        assert report.waic >= report.t_n

    def test_qaic_is_finite(self, report):
        assert math.isfinite(report.qaic_ll)

    def test_qaic_omitted_by_default(self, ex41_model, pauli_scheme, maximally_mixed):
        samples = samples_from_thetas(ex41_model, [[0.7], [0.8]], pauli_scheme.povm)
        report = evaluate_criteria(ex41_model, samples, [0, 2, 4], pauli_scheme, maximally_mixed)
        assert report.qaic_ll is None

    def test_negative_log_variance_trace_is_logged(self, ex41_model, pauli_scheme, maximally_mixed, mocker, caplog):
        samples = samples_from_thetas(ex41_model, [[0.7], [0.8]], pauli_scheme.povm)
        mocker.patch("qsing.inference.posterior.posterior_matrix_var_log", return_value=-1e-5 * np.eye(2))
        with caplog.at_level(logging.WARNING, logger="qsing.inference.posterior"):
            evaluate_criteria(ex41_model, samples, [0, 2, 4], pauli_scheme, maximally_mixed)
        assert "Tr(rho V_theta[log sigma])" in caplog.text

    def test_qaic_nan_when_estimate_hits_boundary(self, ex41_model, pauli_scheme, maximally_mixed):
        config = MhConfig(n_samples=400, burn_in=100, step_scale=0.1)
        outcomes = [0] * 20
        samples = run_mh(ex41_model, outcomes, pauli_scheme.povm, config, np.random.default_rng(3))
        report = evaluate_criteria(ex41_model, samples, outcomes, pauli_scheme, maximally_mixed, with_qaic=True)
        assert math.isnan(report.qaic_ll)
