"""Monte Carlo diagnostics against closed forms, and the scale check."""

import numpy as np
import pytest

from paqlearn.diagnostics import (
    ScaleScenario,
    bias_monte_carlo,
    inverse_moment_check,
    scale_equivariance_check,
    truncation_audit,
)
from paqlearn.errors import InvalidDim, PropertyViolated
from paqlearn.linalg import MetricMatrix, SymMatrix, generate_metric_orthonormal
from paqlearn.oracles import NoiseModel
from paqlearn.pipeline import PipelineConfig, PipelineOutput, run_pipeline


def identity_metric(d, sigma=1.0):
    return MetricMatrix(SymMatrix(sigma * np.eye(d)), d, np.full(d, sigma))


class TestBiasMonteCarlo:
    def test_zero_noise_control(self):
        rep = bias_monte_carlo(
            identity_metric(6),
            NoiseModel("none", 0.0, 10.0),
            20_000,
            np.random.default_rng(0),
        )
        assert np.all(rep.estimate == 0.0)
        assert rep.z_score == 0.0

    def test_isotropic_closed_form(self):
        # Sigma = I_10, uniform eta_up = y = 12: nu^2 = 48, target 4.8 I
        rep = bias_monte_carlo(
            identity_metric(10),
            NoiseModel("uniform", 12.0, 12.0),
            200_000,
            np.random.default_rng(1),
        )
        np.testing.assert_allclose(rep.target, 4.8 * np.eye(10))
        assert rep.z_score <= 5.0

    def test_diagonal_positive(self):
        rep = bias_monte_carlo(
            identity_metric(8),
            NoiseModel("uniform", 5.0, 10.0),
            100_000,
            np.random.default_rng(2),
        )
        assert np.all(np.diagonal(rep.estimate) > 0.0)

    def test_quadratic_noise_scaling(self):
        # doubling eta_up multiplies the diagonal mean by 4 (nu^2 scaling)
        rng_a = np.random.default_rng(3)
        rng_b = np.random.default_rng(3)
        lo = bias_monte_carlo(
            identity_metric(6), NoiseModel("uniform", 5.0, 20.0), 400_000, rng_a
        )
        hi = bias_monte_carlo(
            identity_metric(6), NoiseModel("uniform", 10.0, 20.0), 400_000, rng_b
        )
        ratio = np.mean(np.diagonal(hi.estimate)) / np.mean(np.diagonal(lo.estimate))
        assert ratio == pytest.approx(4.0, rel=0.15)

    def test_anisotropic_has_no_target(self):
        rng = np.random.default_rng(4)
        metric = generate_metric_orthonormal(6, 2, rng)
        rep = bias_monte_carlo(
            metric, NoiseModel("uniform", 2.0, 10.0), 20_000, rng
        )
        assert rep.target is None

    def test_sample_floor(self):
        with pytest.raises(ValueError):
            bias_monte_carlo(
                identity_metric(4),
                NoiseModel("none", 0.0, 1.0),
                100,
                np.random.default_rng(5),
            )


class TestInverseMomentCheck:
    def test_first_moment_d10(self):
        rep = inverse_moment_check(10, 1, 400_000, np.random.default_rng(6))
        assert rep.target == pytest.approx(0.125)
        assert abs(rep.z_score) <= 5.0

    def test_fourth_moment_target(self):
        rep = inverse_moment_check(10, 4, 1_000_000, np.random.default_rng(0))
        assert rep.target == pytest.approx(1.0 / 384.0)
        assert abs(rep.z_score) <= 5.0

    def test_existence_gate(self):
        rng = np.random.default_rng(7)
        with pytest.raises(InvalidDim):
            inverse_moment_check(9, 4, 10_000, rng)
        with pytest.raises(InvalidDim):
            inverse_moment_check(8, 4, 10_000, rng)
        with pytest.raises(InvalidDim):
            inverse_moment_check(3, 1, 10_000, rng)

    def test_first_moment_decreases_in_d(self):
        rng = np.random.default_rng(8)
        previous = np.inf
        for d in (5, 10, 20, 50):
            rep = inverse_moment_check(d, 1, 200_000, rng)
            assert rep.target == pytest.approx(1.0 / (d - 2))
            assert rep.estimate < previous
            previous = rep.estimate


class TestTruncationAudit:
    def _output(self, tau, rng, n=300):
        metric = generate_metric_orthonormal(5, 3, rng)
        noise = NoiseModel("uniform", 4.0, 10.0)
        cfg = PipelineConfig(N=n, m=1, tau=tau, noise=noise)
        return run_pipeline(metric, cfg, rng)

    def test_infinite_tau(self):
        out = self._output(1e30, np.random.default_rng(9))
        audit = truncation_audit(out)
        assert audit.truncation_hits == 0
        np.testing.assert_array_equal(
            out.truncated_responses, out.averaged_responses
        )

    def test_tiny_tau_truncates_all(self):
        out = self._output(1e-9, np.random.default_rng(10))
        audit = truncation_audit(out)
        assert audit.truncation_hits == audit.n
        assert np.all(out.truncated_responses == 1e-9)

    def test_partial_truncation_rate(self):
        # a tau inside the response distribution gives a rate in (0, 0.5)
        rng = np.random.default_rng(11)
        metric = generate_metric_orthonormal(5, 3, rng)
        noise = NoiseModel("uniform", 4.0, 10.0)
        out = run_pipeline(
            metric, PipelineConfig(N=500, m=1, tau=2.5, noise=noise), rng
        )
        audit = truncation_audit(out)
        assert 0.0 < audit.hit_rate < 0.5

    def test_policy_tau_rarely_truncates(self):
        # at the m-sweep parameters the policy threshold sits so deep in
        # the tail that a 1e4-vector run typically records no hits at all
        rng = np.random.default_rng(12)
        metric = generate_metric_orthonormal(50, 9, rng)
        noise = NoiseModel("uniform", 200.0, 200.0)
        from paqlearn.pipeline import choose_m, choose_tau

        m = choose_m(noise, 20000, 50)
        tau = choose_tau(metric.sigma_r, 9, noise, 20000, m, 50)
        out = run_pipeline(
            metric, PipelineConfig(N=20000, m=m, tau=tau, noise=noise), rng
        )
        audit = truncation_audit(out)
        assert 0.0 <= audit.hit_rate < 0.5

    def test_violation_detected(self):
        out = self._output(2.0, np.random.default_rng(13))
        tampered = PipelineOutput(
            sensing_vectors=out.sensing_vectors,
            truncated_responses=out.truncated_responses + 10.0,
            averaged_responses=out.averaged_responses,
            truncation_hits=out.truncation_hits,
            tau=out.tau,
        )
        with pytest.raises(PropertyViolated):
            truncation_audit(tampered)


class TestScaleEquivariance:
    def test_identity_scale_is_exact(self):
        assert scale_equivariance_check(ScaleScenario(), 1.0) == 0.0

    @pytest.mark.parametrize("c", [7.3, 0.01])
    def test_noisy_scaling(self, c):
        dev = scale_equivariance_check(ScaleScenario(d=20, r=10), c)
        assert dev <= 1e-6

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            scale_equivariance_check(ScaleScenario(), 0.0)
