import numpy as np
import pytest

from polyrom.errors import InvalidInputError, NumericalBlowupError
from polyrom.solver import (BurgersConfig, burgers_rhs, collocation_points,
                            dealias_mask, forcing_spectrum,
                            generate_training_set, integrate_step,
                            nonlinear_term, nu_of, omega_of, simulate_batch,
                            simulate_trajectory, substep_count,
                            translate_trajectory, wavenumbers)


def single_mode(cfg, amplitude=1.0, mode=1):
    x = collocation_points(cfg)
    return np.fft.fft(amplitude * np.sin(2 * np.pi * mode * x / cfg.domain_length))


class TestConfigValidation:
    def test_defaults_match_reference_setup(self):
        cfg = BurgersConfig()
        assert cfg.grid_size == 256
        assert cfg.nu1 == 0.01 and cfg.nu2 == 0.1
        assert np.isclose(cfg.omega1, 0.2 * np.pi)
        assert np.isclose(cfg.omega2, 0.4 * np.pi)
        assert cfg.dt_snapshot == 0.05

    @pytest.mark.parametrize("kwargs", [
        {"grid_size": 6},
        {"grid_size": 100},
        {"domain_length": 0.0},
        {"nu1": 0.0},
        {"nu1": 0.2, "nu2": 0.1},
        {"omega1": 2.0, "omega2": 1.0},
        {"dt_solver": 0.0},
        {"dt_snapshot": 0.07},
        {"transient_time": -1.0},
    ])
    def test_rejects_bad_fields(self, kwargs):
        with pytest.raises(InvalidInputError):
            BurgersConfig(**kwargs)

    def test_parameter_maps(self):
        cfg = BurgersConfig()
        assert nu_of(0.0, cfg) == cfg.nu1
        assert nu_of(1.0, cfg) == cfg.nu2
        assert omega_of(0.5, cfg) == pytest.approx(0.3 * np.pi)


class TestForcing:
    def test_matches_grid_evaluation(self, fast_cfg):
        t, p = 0.7, 0.4
        x = collocation_points(fast_cfg)
        omega = omega_of(p, fast_cfg)
        grid = 2.0 * np.sin(omega * t - fast_cfg.k0 * x)
        expected = np.fft.fft(grid)
        actual = forcing_spectrum(t, p, fast_cfg)
        np.testing.assert_allclose(actual, expected, atol=1e-10)

    def test_band_limited_to_first_mode(self, fast_cfg):
        f_hat = forcing_spectrum(1.3, 0.9, fast_cfg)
        interior = np.delete(f_hat, [1, fast_cfg.grid_size - 1])
        assert np.abs(interior).max() == 0.0


class TestRhs:
    def test_zero_field_returns_forcing(self, fast_cfg):
        u_hat = np.zeros(fast_cfg.grid_size, dtype=complex)
        rhs = burgers_rhs(u_hat, 0.0, 0.3, fast_cfg)
        np.testing.assert_allclose(rhs, forcing_spectrum(0.0, 0.3, fast_cfg),
                                   atol=1e-12)
        # at t=0 the real-space forcing is 2 sin(-k x)
        x = collocation_points(fast_cfg)
        np.testing.assert_allclose(np.fft.ifft(rhs).real,
                                   2 * np.sin(-fast_cfg.k0 * x), atol=1e-12)

    def test_single_mode_against_symbolic(self):
        # u = sin(k x), forcing off, p = 1: the diffusion term is
        # -nu k^2 sin(k x) and the advection term -sin(k x) cos(k x) k.
        cfg = BurgersConfig(grid_size=64, forcing_amplitude=0.0)
        k = cfg.k0
        x = collocation_points(cfg)
        rhs = burgers_rhs(single_mode(cfg), 0.0, 1.0, cfg)
        expected = -cfg.nu2 * k ** 2 * np.sin(k * x) - (k / 2) * np.sin(2 * k * x)
        np.testing.assert_allclose(np.fft.ifft(rhs).real, expected,
                                   rtol=0, atol=1e-10)

    def test_mean_is_conserved_for_any_state(self, fast_cfg):
        # Advection in conservative form cannot move the spatial mean, and
        # neither diffusion nor the forcing has a mean component.
        rng = np.random.default_rng(3)
        u_hat = np.fft.fft(rng.standard_normal(fast_cfg.grid_size))
        for p in (0.0, 0.5, 1.0):
            rhs = burgers_rhs(u_hat, 0.2, p, fast_cfg)
            assert abs(rhs[0]) < 1e-10

    def test_dealiased_upper_third_exactly_zero(self, fast_cfg):
        rng = np.random.default_rng(4)
        u_hat = np.fft.fft(rng.standard_normal(fast_cfg.grid_size))
        out = nonlinear_term(u_hat, fast_cfg)
        mode = np.abs(np.fft.fftfreq(fast_cfg.grid_size) * fast_cfg.grid_size)
        assert np.all(out[mode > fast_cfg.grid_size // 3] == 0.0)

    def test_dimension_and_range_validation(self, fast_cfg):
        with pytest.raises(InvalidInputError):
            burgers_rhs(np.zeros(12, dtype=complex), 0.0, 0.5, fast_cfg)
        with pytest.raises(InvalidInputError):
            burgers_rhs(np.zeros(fast_cfg.grid_size, dtype=complex), 0.0, 1.5,
                        fast_cfg)


class TestIntegrateStep:
    def test_pure_decay_matches_exponential(self):
        cfg = BurgersConfig(grid_size=64, forcing_amplitude=0.0)
        u_hat = single_mode(cfg, amplitude=1e-8)
        nu = nu_of(1.0, cfg)
        out = integrate_step(u_hat, 0.0, 1.0, cfg)
        decay = np.exp(-nu * cfg.k0 ** 2 * cfg.dt_solver)
        assert abs(out[1]) == pytest.approx(abs(u_hat[1]) * decay, rel=1e-12)

    def test_zero_field_zero_forcing_stays_zero(self):
        cfg = BurgersConfig(grid_size=64, forcing_amplitude=0.0)
        out = integrate_step(np.zeros(64, dtype=complex), 0.0, 0.5, cfg)
        assert np.all(out == 0.0)

    def test_linear_flow_reversibility(self):
        # Backward diffusion amplifies float residue near the dealiasing
        # cut by exp(nu k_cut^2 dt), so probe the flow property at the low
        # end of the viscosity range where that factor stays small.
        cfg = BurgersConfig(grid_size=64, forcing_amplitude=0.0)
        u_hat = single_mode(cfg, amplitude=1e-12)
        forward = integrate_step(u_hat, 0.0, 0.0, cfg, dt=cfg.dt_solver)
        back = integrate_step(forward, cfg.dt_solver, 0.0, cfg, dt=-cfg.dt_solver)
        assert np.abs(back - u_hat).max() / np.abs(u_hat).max() < 1e-10

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_blowup_raises_with_time(self):
        cfg = BurgersConfig(grid_size=64, forcing_amplitude=1e12,
                            transient_time=1.0)
        with pytest.raises(NumericalBlowupError) as excinfo:
            simulate_trajectory(0.5, 5, cfg)
        assert excinfo.value.time > 0

    def test_heat_limit_decay_rate_over_100_steps(self):
        # forcing off, single mode: the decay rate must match nu k^2 to
        # high accuracy because diffusion is handled exactly.
        cfg = BurgersConfig(grid_size=64, forcing_amplitude=0.0)
        u_hat = single_mode(cfg, amplitude=1e-6)
        t = 0.0
        amp0 = abs(u_hat[1])
        for _ in range(100):
            u_hat = integrate_step(u_hat, t, 1.0, cfg)
            t += cfg.dt_solver
        rate = -np.log(abs(u_hat[1]) / amp0) / t
        expected = nu_of(1.0, cfg) * cfg.k0 ** 2
        assert rate == pytest.approx(expected, rel=1e-6)


class TestAgainstReferenceIntegrator:
    def test_matches_scipy_on_nonlinear_problem(self):
        from scipy.integrate import solve_ivp

        cfg = BurgersConfig(grid_size=64, transient_time=5.0)
        p = 0.5
        traj = simulate_trajectory(p, 2, cfg)
        u_hat = np.fft.fft(traj.snapshots[0])
        t0 = traj.t0
        horizon = 0.5

        sol = solve_ivp(
            lambda t, u: burgers_rhs(u, t, p, cfg), (t0, t0 + horizon), u_hat,
            method="RK45", rtol=1e-11, atol=1e-12,
        )
        steps = int(round(horizon / cfg.dt_solver))
        current, t = u_hat, t0
        sub = substep_count(cfg)
        for _ in range(steps * sub):
            current = integrate_step(current, t, p, cfg, dt=cfg.dt_solver / sub)
            t += cfg.dt_solver / sub
        err = np.linalg.norm(current - sol.y[:, -1]) / np.linalg.norm(sol.y[:, -1])
        assert err < 1e-8


class TestSimulateTrajectory:
    def test_minimal_two_snapshots(self, fast_cfg):
        traj = simulate_trajectory(0.5, 2, fast_cfg)
        assert traj.snapshots.shape == (2, fast_cfg.grid_size)
        assert traj.t0 == pytest.approx(fast_cfg.transient_time)
        assert traj.meta["substeps"] == substep_count(fast_cfg)

    def test_rejects_bad_arguments(self, fast_cfg):
        with pytest.raises(InvalidInputError):
            simulate_trajectory(1.5, 5, fast_cfg)
        with pytest.raises(InvalidInputError):
            simulate_trajectory(0.5, 1, fast_cfg)

    def test_deterministic_repeat(self, fast_cfg):
        a = simulate_trajectory(0.3, 4, fast_cfg)
        b = simulate_trajectory(0.3, 4, fast_cfg)
        assert np.array_equal(a.snapshots, b.snapshots)

    def test_snapshots_are_real_finite(self, fast_cfg):
        traj = simulate_trajectory(0.8, 6, fast_cfg)
        assert traj.snapshots.dtype == np.float64
        assert np.isfinite(traj.snapshots).all()
        # spectra stay conjugate-symmetric, i.e. states carry no imaginary
        # residue beyond rounding
        spectrum = np.fft.fft(traj.snapshots[-1])
        residue = spectrum - np.conj(spectrum[np.r_[0, np.arange(63, 0, -1)]])
        assert np.abs(residue).max() < 1e-12 * np.abs(spectrum).max()

    def test_batch_matches_single_runs(self, fast_cfg):
        batch = simulate_batch([0.2, 0.7], 3, fast_cfg)
        for p, traj in zip((0.2, 0.7), batch):
            single = simulate_trajectory(p, 3, fast_cfg)
            np.testing.assert_allclose(traj.snapshots, single.snapshots,
                                       rtol=1e-9, atol=1e-12)


class TestGenerateTrainingSet:
    def test_reference_grid_has_six_runs(self, fast_cfg):
        trajs = generate_training_set([0.0, 0.2, 0.4, 0.6, 0.8, 1.0], 3, fast_cfg)
        assert len(trajs) == 6
        assert [t.p for t in trajs] == [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
        assert sum(t.snapshots.shape[0] for t in trajs) == 6 * 3

    def test_single_parameter(self, fast_cfg):
        assert len(generate_training_set([0.5], 2, fast_cfg)) == 1

    @pytest.mark.parametrize("grid", [[], [0.2, 0.2], [0.5, 0.3], [0.5, 1.2]])
    def test_rejects_bad_grids(self, grid, fast_cfg):
        with pytest.raises(InvalidInputError):
            generate_training_set(grid, 2, fast_cfg)


class TestTranslation:
    def test_grid_multiple_shift_is_a_roll(self, fast_cfg):
        traj = simulate_trajectory(0.4, 3, fast_cfg)
        shift = 5
        delta = shift * fast_cfg.domain_length / fast_cfg.grid_size
        moved = translate_trajectory(traj, delta, fast_cfg)
        np.testing.assert_allclose(moved.snapshots,
                                   np.roll(traj.snapshots, shift, axis=1),
                                   atol=1e-10)

    def test_phase_offset_start_equals_translated_base(self):
        # Starting the transient at time tau equals translating the tau=0
        # solution by omega tau / k0; the seed realization relies on this.
        cfg = BurgersConfig(grid_size=64, transient_time=8.0)
        p = 0.6
        tau = 0.37
        shifted_start = simulate_trajectory(p, 3, cfg, t_start=tau)
        base = simulate_trajectory(p, 3, cfg)
        omega = omega_of(p, cfg)
        translated = translate_trajectory(base, omega * tau / cfg.k0, cfg)
        np.testing.assert_allclose(shifted_start.snapshots,
                                   translated.snapshots, atol=1e-9)


class TestPostTransientPeriodicity:
    @pytest.mark.parametrize("p", [0.25, 0.5])
    def test_attractor_is_periodic(self, p):
        # reference-scale run: forcing period nearest snapshot count
        cfg = BurgersConfig()
        omega = omega_of(p, cfg)
        period_steps = round(2 * np.pi / omega / cfg.dt_snapshot)
        traj = simulate_trajectory(p, period_steps + 40, cfg)
        Z = traj.snapshots
        num = np.linalg.norm(Z[period_steps:] - Z[:-period_steps], axis=1)
        den = np.linalg.norm(Z[:-period_steps], axis=1)
        assert (num / den).max() < 0.05
