"""
Tests for the Metropolis-Hastings sampler and posterior functionals
"""

import dataclasses
import logging
import math

import numpy as np
import pytest
from pydantic import ValidationError

from qsing.inference.models import domain_contains, sigma
from qsing.inference.posterior import (
    AllProposalsRejected,
    MhConfig,
    PosteriorSamples,
    bayes_mean_state,
    monte_carlo_stderr,
    posterior_cov,
    posterior_matrix_mean_log,
    posterior_matrix_var_log,
    posterior_mean_theta,
    run_mh,
    samples_from_thetas,
    state_weighted_log_variance,
    thin,
)
from qsing.inference.theory import eval_K
from qsing.quantum.hermitian_linalg import matrix_log
from qsing.quantum.quantum_core import as_density_matrix, born_probabilities
from qsing.quantum.shadows import sample_outcomes


@pytest.fixture
def ex41_chain(ex41_model, pauli_scheme, maximally_mixed, small_mh_config):
    data_rng = np.random.default_rng(11)
    outcomes = sample_outcomes(maximally_mixed, pauli_scheme, 2000, data_rng)
    samples = run_mh(ex41_model, outcomes, pauli_scheme.povm, small_mh_config, np.random.default_rng(12))
    return outcomes, samples


class TestMhConfig:
    """Tests for chain configuration validation"""

    def test_defaults(self):
        config = MhConfig()
        assert config.n_samples == 5000
        assert config.burn_in == 500
        assert config.adapt_during_burn_in is True
        assert config.target_acceptance == 0.3

    def test_burn_in_must_be_smaller(self):
        with pytest.raises(ValidationError, match="burn_in"):
            MhConfig(n_samples=100, burn_in=100)

    def test_step_scale_positive(self):
        with pytest.raises(ValidationError):
            MhConfig(step_scale=[0.1, -0.1])

    def test_target_acceptance_range(self):
        with pytest.raises(ValidationError):
            MhConfig(target_acceptance=1.5)

    def test_unknown_key_rejected(self):
        with pytest.raises(ValidationError):
            MhConfig(temperature=2.0)

    def test_step_vector(self):
        assert MhConfig(step_scale=0.2).step_vector(3).tolist() == [0.2, 0.2, 0.2]
        with pytest.raises(ValueError, match="entries"):
            MhConfig(step_scale=[0.1, 0.2]).step_vector(3)


class TestRunMh:
    """Tests for the sampler on the regular one-parameter model"""

    def test_sample_count_and_domain(self, ex41_model, ex41_chain, small_mh_config):
        _, samples = ex41_chain
        assert samples.n_samples == small_mh_config.n_samples - small_mh_config.burn_in
        assert all(domain_contains(ex41_model, t) for t in samples.thetas)

    def test_posterior_concentrates_at_optimum(self, ex41_chain):
        _, samples = ex41_chain
        assert posterior_mean_theta(samples)[0] == pytest.approx(math.pi / 4, abs=0.06)

    def test_acceptance_rate_reasonable(self, ex41_chain):
        _, samples = ex41_chain
        assert 0.05 < samples.acceptance_rate < 0.8
        assert samples.diagnostics()["acceptance_rate"] == samples.acceptance_rate

    def test_caches_match_states(self, ex41_model, ex41_chain, pauli_scheme):
        _, samples = ex41_chain
        for s in (0, samples.n_samples // 2, samples.n_samples - 1):
            state = sigma(ex41_model, samples.thetas[s])
            assert np.allclose(samples.sigma_cache[s], state)
            assert np.allclose(samples.log_sigma_cache[s], matrix_log(state))
            assert np.allclose(samples.prob_cache[:, s], born_probabilities(state, pauli_scheme.povm))
        assert samples.prob_cache.shape == (6, samples.n_samples)

    def test_deterministic_for_fixed_stream(self, ex41_model, pauli_scheme, maximally_mixed, small_mh_config):
        outcomes = sample_outcomes(maximally_mixed, pauli_scheme, 500, np.random.default_rng(1))
        first = run_mh(ex41_model, outcomes, pauli_scheme.povm, small_mh_config, np.random.default_rng(2))
        second = run_mh(ex41_model, outcomes, pauli_scheme.povm, small_mh_config, np.random.default_rng(2))
        assert np.array_equal(first.thetas, second.thetas)
        assert first.acceptance_rate == second.acceptance_rate

    def test_labels_and_indices_agree(self, ex41_model, pauli_scheme, small_mh_config):
        labels = ["Z+", "Z−", "X+", "Y-"] * 50
        indices = [0, 1, 2, 5] * 50
        by_label = run_mh(ex41_model, labels, pauli_scheme.povm, small_mh_config, np.random.default_rng(5))
        by_index = run_mh(ex41_model, indices, pauli_scheme.povm, small_mh_config, np.random.default_rng(5))
        assert np.array_equal(by_label.thetas, by_index.thetas)

    def test_initial_theta_used(self, ex41_model, pauli_scheme):
        config = MhConfig(n_samples=50, burn_in=0, step_scale=1e-9, adapt_during_burn_in=False, initial_theta=[0.5])
        samples = run_mh(ex41_model, [0, 1, 2], pauli_scheme.povm, config, np.random.default_rng(0))
        assert np.allclose(samples.thetas, 0.5, atol=1e-6)

    def test_impossible_initial_theta(self, ex41_model, pauli_scheme):
        config = MhConfig(n_samples=50, burn_in=10, initial_theta=[0.0])
        with pytest.raises(AllProposalsRejected):
            run_mh(ex41_model, ["Z-"], pauli_scheme.povm, config, np.random.default_rng(0))

    def test_all_proposals_rejected(self, ex41_model, pauli_scheme):
        config = MhConfig(n_samples=300, burn_in=200, step_scale=1e6, adapt_during_burn_in=False)
        with pytest.raises(AllProposalsRejected, match="burn-in acceptance"):
            run_mh(ex41_model, [0, 1, 2], pauli_scheme.povm, config, np.random.default_rng(0))

    def test_empty_data_rejected(self, ex41_model, pauli_scheme, small_mh_config):
        with pytest.raises(ValueError, match="at least one"):
            run_mh(ex41_model, [], pauli_scheme.povm, small_mh_config, np.random.default_rng(0))

    def test_two_parameter_model_concentrates_on_both_optimal_branches(self, ex42_model, pauli_scheme):
        rho = sigma(ex42_model, [0.0, 0.0])
        outcomes = sample_outcomes(rho, pauli_scheme, 1000, np.random.default_rng(8))
        config = MhConfig(n_samples=2000, burn_in=500, step_scale=[0.05, 0.05])
        samples = run_mh(ex42_model, outcomes, pauli_scheme.povm, config, np.random.default_rng(9))
        differences = samples.thetas[:, 0] - samples.thetas[:, 1]
        # cos^2(x + pi/3) takes the value 1/4 at x = 0 and at x = pi/3
        distance = np.minimum(np.abs(differences), np.abs(differences - math.pi / 3))
        assert np.quantile(distance, 0.99) < 0.2
        for theta in samples.thetas[::100]:
            assert eval_K(ex42_model, rho, pauli_scheme.povm, theta) < 0.05


class TestPosteriorFunctionals:
    """Tests for posterior averages on fixed sample sets"""

    def test_bayes_mean_state_is_density_matrix(self, ex41_model, ex41_chain):
        _, samples = ex41_chain
        as_density_matrix(bayes_mean_state(ex41_model, samples))

    def test_bayes_mean_state_rejects_other_model_dimension(self, ex41_model, ex41_chain):
        _, samples = ex41_chain
        with pytest.raises(ValueError, match="do not belong"):
            bayes_mean_state(dataclasses.replace(ex41_model, hilbert_dim=4), samples)

    def test_bayes_mean_of_fixed_thetas(self, ex41_model, pauli_scheme):
        samples = samples_from_thetas(ex41_model, [[0.3], [0.6]], pauli_scheme.povm)
        expected = (sigma(ex41_model, [0.3]) + sigma(ex41_model, [0.6])) / 2
        assert np.allclose(bayes_mean_state(ex41_model, samples), expected)
        assert math.isnan(samples.acceptance_rate)

    def test_matrix_mean_and_variance_of_log(self, ex41_model, pauli_scheme):
        samples = samples_from_thetas(ex41_model, [[0.3], [0.6], [0.9]], pauli_scheme.povm)
        logs = [matrix_log(sigma(ex41_model, [t])) for t in (0.3, 0.6, 0.9)]
        mean = sum(logs) / 3
        assert np.allclose(posterior_matrix_mean_log(samples), mean)
        variance = sum(l @ l for l in logs) / 3 - mean @ mean
        assert np.allclose(posterior_matrix_var_log(samples), variance)
        assert np.linalg.eigvalsh(posterior_matrix_var_log(samples)).min() >= -1e-12

    def test_posterior_cov(self, ex41_model, pauli_scheme):
        samples = samples_from_thetas(ex41_model, [[0.3], [0.6], [0.9]], pauli_scheme.povm)
        f = np.array([1.0, 2.0, 3.0])
        g = np.array([2.0, 4.0, 6.0])
        assert posterior_cov(samples, f, g) == pytest.approx(np.mean(f * g) - np.mean(f) * np.mean(g))
        assert posterior_cov(samples, f, np.ones(3)) == pytest.approx(0.0, abs=1e-15)

    def test_posterior_cov_length_mismatch(self, ex41_model, pauli_scheme):
        samples = samples_from_thetas(ex41_model, [[0.3], [0.6]], pauli_scheme.povm)
        with pytest.raises(ValueError, match="mismatch"):
            posterior_cov(samples, [1.0, 2.0], [1.0])
        with pytest.raises(ValueError, match="Expected 2 values"):
            posterior_cov(samples, [1.0, 2.0, 3.0], [1.0, 2.0, 3.0])

    def test_state_weighted_variance_matches_trace(self, ex41_model, pauli_scheme, maximally_mixed):
        samples = samples_from_thetas(ex41_model, [[0.3], [0.6], [0.9]], pauli_scheme.povm)
        expected = np.trace(maximally_mixed @ posterior_matrix_var_log(samples)).real
        assert state_weighted_log_variance(samples, maximally_mixed) == pytest.approx(expected)
        assert expected > 0

    def test_negative_state_weighted_variance_is_logged(self, ex41_model, pauli_scheme, maximally_mixed, mocker, caplog):
        samples = samples_from_thetas(ex41_model, [[0.3], [0.6]], pauli_scheme.povm)
        mocker.patch("qsing.inference.posterior.posterior_matrix_var_log", return_value=-1e-6 * np.eye(2))
        with caplog.at_level(logging.WARNING, logger="qsing.inference.posterior"):
            value = state_weighted_log_variance(samples, maximally_mixed)
        assert value == pytest.approx(-1e-6)
        assert "negative beyond" in caplog.text

    def test_round_off_below_tolerance_is_not_logged(self, ex41_model, pauli_scheme, maximally_mixed, mocker, caplog):
        samples = samples_from_thetas(ex41_model, [[0.3], [0.6]], pauli_scheme.povm)
        mocker.patch("qsing.inference.posterior.posterior_matrix_var_log", return_value=-1e-10 * np.eye(2))
        with caplog.at_level(logging.WARNING, logger="qsing.inference.posterior"):
            state_weighted_log_variance(samples, maximally_mixed)
        assert "negative beyond" not in caplog.text

    def test_thinning_keeps_posterior_mean(self, ex41_chain):
        _, samples = ex41_chain
        thinned = thin(samples, 2)
        shift = np.abs(posterior_mean_theta(thinned) - posterior_mean_theta(samples))
        assert np.all(shift < 2 * monte_carlo_stderr(samples))

    def test_posterior_tightens_with_more_data(self, ex41_model, pauli_scheme, maximally_mixed, small_mh_config):
        spreads = []
        for n in (500, 8000):
            outcomes = sample_outcomes(maximally_mixed, pauli_scheme, n, np.random.default_rng(n))
            samples = run_mh(ex41_model, outcomes, pauli_scheme.povm, small_mh_config, np.random.default_rng(n + 1))
            spreads.append(samples.thetas[:, 0].std())
        # posterior sd scales as n^(-1/2): a factor of 4 between these sizes
        assert spreads[1] < 0.5 * spreads[0]

    def test_sec42_log_variance_matches_fisher_ratio(self, sec42_model, pauli_scheme):
        from qsing.inference.theory import numerical_hessians

        n = 8000
        rho = sigma(sec42_model, [math.pi / 4])
        outcomes = sample_outcomes(rho, pauli_scheme, n, np.random.default_rng(42))
        config = MhConfig(n_samples=3000, burn_in=500, step_scale=0.05)
        samples = run_mh(sec42_model, outcomes, pauli_scheme.povm, config, np.random.default_rng(43))
        report = numerical_hessians(sec42_model, rho, pauli_scheme.povm)
        predicted = float(np.trace(report.I_q @ np.linalg.inv(report.J))) / n
        observed = state_weighted_log_variance(samples, rho)
        assert predicted / 2 <= observed <= 2 * predicted

    def test_thin(self, ex41_chain):
        _, samples = ex41_chain
        thinned = thin(samples, 2)
        assert isinstance(thinned, PosteriorSamples)
        assert thinned.n_samples == (samples.n_samples + 1) // 2
        assert thinned.prob_cache.shape[1] == thinned.n_samples
        with pytest.raises(ValueError):
            thin(samples, 0)

    def test_monte_carlo_stderr(self, ex41_chain):
        _, samples = ex41_chain
        stderr = monte_carlo_stderr(samples)
        assert stderr.shape == (1,)
        assert 0 < stderr[0] < 0.05
