from types import SimpleNamespace

import numpy as np
import pytest

from polyrom.errors import IllConditionedError, InvalidInputError
from polyrom.kalman import (GaussianBelief, NoiseConfig, UkfParams, kf_step,
                            repair_covariance, sigma_points, ukf_step)


def random_stable_system(rng, n, m):
    A = rng.standard_normal((n, n))
    A *= 0.9 / np.abs(np.linalg.eigvals(A)).max()
    H = rng.standard_normal((m, n))
    mean = rng.standard_normal(n)
    C = rng.standard_normal((n, n))
    cov = C @ C.T + 0.1 * np.eye(n)
    return A, H, GaussianBelief(mean, cov)


class TestTypes:
    def test_belief_validation(self):
        with pytest.raises(InvalidInputError):
            GaussianBelief(np.zeros(2), np.zeros((3, 3)))
        with pytest.raises(InvalidInputError):
            GaussianBelief(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]))
        with pytest.raises(InvalidInputError):
            GaussianBelief(np.zeros(2), np.diag([1.0, -1.0]))

    def test_noise_validation(self):
        with pytest.raises(InvalidInputError):
            NoiseConfig(q_state=-1.0)
        with pytest.raises(InvalidInputError):
            NoiseConfig(r_meas=0.0)
        defaults = NoiseConfig()
        assert defaults.q_state == 1e-4
        assert defaults.q_param == 1e-5
        assert defaults.r_meas == 0.0025

    def test_ukf_params_validation(self):
        with pytest.raises(InvalidInputError):
            UkfParams(alpha=0.0)
        with pytest.raises(InvalidInputError):
            UkfParams(alpha=1.0, kappa=-5.0).lam(3)

    def test_repair_covariance_floors_eigenvalues(self):
        fixed = repair_covariance(np.diag([1.0, -1e-6]))
        assert np.linalg.eigvalsh(fixed)[0] >= 0
        np.testing.assert_allclose(fixed, fixed.T)


class TestKfStep:
    def test_scalar_hand_computed_update(self):
        # prior N(0, 1), A = H = 1, q = 0, r = 1, y = 1: the posterior is
        # N(0.5, 0.5)
        belief = GaussianBelief([0.0], [[1.0]])
        noise = SimpleNamespace(q_state=0.0, r_meas=1.0)
        post = kf_step(belief, [[1.0]], [[1.0]], [1.0], noise)
        assert post.mean[0] == pytest.approx(0.5)
        assert post.cov[0, 0] == pytest.approx(0.5)

    def test_huge_measurement_noise_keeps_prior(self):
        rng = np.random.default_rng(0)
        A, H, belief = random_stable_system(rng, 3, 2)
        noise = SimpleNamespace(q_state=0.0, r_meas=1e12)
        post = kf_step(belief, A, H, np.array([5.0, -3.0]), noise)
        np.testing.assert_allclose(post.mean, A @ belief.mean, atol=1e-8)

    def test_tiny_measurement_noise_trusts_data(self):
        belief = GaussianBelief(np.zeros(2), np.eye(2))
        noise = SimpleNamespace(q_state=0.0, r_meas=1e-12)
        y = np.array([2.0, -1.0])
        post = kf_step(belief, np.eye(2), np.eye(2), y, noise)
        np.testing.assert_allclose(post.mean, y, atol=1e-5)

    def test_posterior_is_symmetric_psd(self):
        rng = np.random.default_rng(1)
        belief = random_stable_system(rng, 4, 2)[2]
        A, H, _ = random_stable_system(rng, 4, 2)
        post = kf_step(belief, A, H, rng.standard_normal(2), NoiseConfig())
        assert np.abs(post.cov - post.cov.T).max() < 1e-12
        assert np.linalg.eigvalsh(post.cov)[0] >= -1e-12

    def test_dimension_mismatch(self):
        belief = GaussianBelief(np.zeros(2), np.eye(2))
        with pytest.raises(InvalidInputError):
            kf_step(belief, np.eye(3), np.eye(2), np.zeros(2), NoiseConfig())

    def test_singular_innovation_names_conditioning(self):
        belief = GaussianBelief(np.zeros(2), np.eye(2))
        noise = SimpleNamespace(q_state=0.0, r_meas=0.0)
        H = np.array([[1.0, 0.0], [1.0, 0.0]])  # rank-1 with zero noise
        with pytest.raises(IllConditionedError, match="cond"):
            kf_step(belief, np.eye(2), H, np.zeros(2), noise)


class TestSigmaPoints:
    def test_weights_sum_to_one_and_reconstruct(self):
        rng = np.random.default_rng(2)
        mean = rng.standard_normal(4)
        C = rng.standard_normal((4, 4))
        cov = C @ C.T + 0.5 * np.eye(4)
        pts, wm, wc = sigma_points(mean, cov, UkfParams())
        assert pts.shape == (9, 4)
        assert wm.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(wm @ pts, mean, atol=1e-12)
        dev = pts - mean
        np.testing.assert_allclose((dev.T * wc) @ dev, cov, atol=1e-10)

    def test_singular_covariance_recovers_with_jitter(self):
        diag = {}
        pts, _, _ = sigma_points(np.zeros(2), np.zeros((2, 2)), UkfParams(),
                                 diagnostics=diag)
        assert np.isfinite(pts).all()
        assert diag.get("cholesky_retries", 0) >= 1


class TestUkfStep:
    def test_matches_linear_kf(self):
        rng = np.random.default_rng(3)
        A, H, belief = random_stable_system(rng, 3, 2)
        noise = NoiseConfig(q_state=0.05, r_meas=0.1)
        y = rng.standard_normal(2)
        lin = kf_step(belief, A, H, y, noise)
        unsc = ukf_step(belief, lambda pts: pts @ A.T, lambda pts: pts @ H.T,
                        y, noise, UkfParams())
        np.testing.assert_allclose(unsc.mean, lin.mean, atol=1e-8)
        np.testing.assert_allclose(unsc.cov, lin.cov, atol=1e-8)

    def test_matches_linear_kf_across_random_steps(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            n = rng.integers(1, 5)
            m = rng.integers(1, 4)
            A, H, belief = random_stable_system(rng, n, m)
            noise = NoiseConfig(q_state=10 ** rng.uniform(-6, -2),
                                r_meas=10 ** rng.uniform(-4, 0))
            y = rng.standard_normal(m)
            lin = kf_step(belief, A, H, y, noise)
            unsc = ukf_step(belief, lambda pts: pts @ A.T,
                            lambda pts: pts @ H.T, y, noise, UkfParams())
            np.testing.assert_allclose(unsc.mean, lin.mean, atol=1e-8)
            np.testing.assert_allclose(unsc.cov, lin.cov, atol=1e-8)

    def test_zero_innovation_keeps_mean(self):
        belief = GaussianBelief([1.0, -2.0], np.diag([0.5, 0.25]))
        H = np.array([[1.0, 1.0]])
        noise = NoiseConfig(q_state=0.0, r_meas=0.01)
        y = H @ belief.mean
        post = ukf_step(belief, lambda pts: pts, lambda pts: pts @ H.T,
                        y, noise, UkfParams())
        np.testing.assert_allclose(post.mean, belief.mean, atol=1e-12)

    def test_consistent_updates_shrink_trace(self):
        belief = GaussianBelief(np.zeros(3), np.eye(3))
        noise = NoiseConfig(q_state=0.0, r_meas=0.5)
        traces = [np.trace(belief.cov)]
        for _ in range(10):
            belief = ukf_step(belief, lambda pts: pts, lambda pts: pts,
                              np.zeros(3), noise, UkfParams())
            traces.append(np.trace(belief.cov))
        assert all(b <= a + 1e-12 for a, b in zip(traces, traces[1:]))

    def test_scalar_map_fallback(self):
        belief = GaussianBelief([0.5], [[0.04]])
        noise = NoiseConfig(q_state=0.0, r_meas=0.01)

        def f(vec):  # works on single vectors only
            assert np.asarray(vec).ndim == 1
            return np.atleast_1d(vec)[:1]

        post = ukf_step(belief, f, f, np.array([0.6]), noise, UkfParams())
        assert post.mean.shape == (1,)
        assert 0.5 < post.mean[0] < 0.6

    def test_q_diag_validation(self):
        belief = GaussianBelief(np.zeros(2), np.eye(2))
        with pytest.raises(InvalidInputError):
            ukf_step(belief, lambda pts: pts, lambda pts: pts, np.zeros(2),
                     NoiseConfig(), UkfParams(), q_diag=np.zeros(3))

    def test_measurement_length_validation(self):
        belief = GaussianBelief(np.zeros(2), np.eye(2))
        with pytest.raises(InvalidInputError):
            ukf_step(belief, lambda pts: pts, lambda pts: pts, np.zeros(3),
                     NoiseConfig(), UkfParams())
