"""Tests for the multi-tap analog canceler."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.canceler import (
    CANCELLATION_CAP_DB,
    MICROSTRIP,
    OPTICAL,
    Canceler,
    SiBandModel,
    apply_loss_profile,
    band_grid,
    cancellation_db,
    cancellation_trials,
    canceler_response,
    draw_si_paths,
    fit_weights,
    sweep_taps_bandwidth,
)

BAND = band_grid(28e9, 400e6, 1e6)


def _canceler(delays, gains=None, weights=None, coupler=1.0, band=BAND):
    delays = np.asarray(delays, dtype=float)
    gains = np.ones_like(delays) if gains is None else np.asarray(gains, dtype=float)
    return Canceler(
        delays=delays,
        coupler_loss=coupler,
        propagation_loss=gains,
        tap_coupling=np.ones_like(delays),
        band=band,
        weights=weights,
    )


# ============================================================================
# RESPONSE
# ============================================================================


class TestCancelerResponse:
    def test_single_unit_tap_is_flat_one(self):
        c = _canceler([0.0], weights=[1.0])
        assert_allclose(canceler_response(c, BAND), 1.0, atol=1e-15)

    def test_zero_weights_give_zero(self):
        c = _canceler([0.0, 1e-9, 2e-9])
        assert_allclose(canceler_response(c, BAND), 0.0)

    def test_two_taps_match_term_by_term_sum(self):
        delays = [0.5e-9, 3.0e-9]
        gains = [0.8, 0.6]
        weights = np.array([0.3 - 0.2j, -0.7 + 0.1j])
        c = _canceler(delays, gains=gains, weights=weights, coupler=0.9)
        omega = BAND[::37]
        expected = np.zeros(len(omega), dtype=complex)
        for i, w in enumerate(omega):
            for m in range(2):
                expected[i] += 0.9 * gains[m] * weights[m] * np.exp(-1j * w * delays[m])
        assert_allclose(canceler_response(c, omega), expected, rtol=1e-12)

    def test_scalar_frequency(self):
        c = _canceler([0.0], weights=[0.5j])
        assert canceler_response(c, BAND[10]) == pytest.approx(0.5j)

    def test_out_of_band_rejected(self):
        c = _canceler([0.0])
        with pytest.raises(ValueError, match="outside"):
            canceler_response(c, BAND[-1] + 2 * np.pi * 10e6)

    def test_weights_outside_box_rejected(self):
        with pytest.raises(ValueError, match=r"\[-1, 1\]"):
            _canceler([0.0], weights=[1.5])

    def test_non_increasing_delays_rejected(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            _canceler([1e-9, 1e-9])


# ============================================================================
# LOSS PROFILES
# ============================================================================


class TestLossProfiles:
    def test_single_tap_is_coupler_times_one_pitch(self):
        c = apply_loss_profile(OPTICAL, 1, 200e-9)
        pitch_loss = 10 ** (-0.461 * 0.02 / 20)
        assert c.n_taps == 1
        assert c.tap_gains[0] == pytest.approx(0.1 * pitch_loss)

    def test_microstrip_amplitudes_strictly_decrease(self):
        c = apply_loss_profile(MICROSTRIP, 60, 200e-9)
        assert np.all(np.diff(c.tap_gains) < 0)
        assert c.tap_gains[-1] / c.tap_gains[0] < 1e-3

    def test_microstrip_coupler_loss_grows_with_tap_count(self):
        for M in (1, 10, 40):
            c = apply_loss_profile(MICROSTRIP, M, 200e-9)
            loss_db = -20 * np.log10(c.tap_coupling)
            assert_allclose(loss_db, 2.0 * (M - 1), atol=1e-12)

    def test_fbg_cumulative_loss(self):
        c = apply_loss_profile(OPTICAL, 100, 200e-9)
        loss_db = -20 * np.log10(c.propagation_loss)
        expected = 0.461 * 0.02 * np.arange(1, 101)
        assert_allclose(loss_db, expected, rtol=1e-12)
        assert_allclose(c.tap_coupling, 1.0)

    def test_taps_cover_delay_span(self):
        c = apply_loss_profile(MICROSTRIP, 10, 200e-9)
        assert_allclose(c.delays, np.arange(10) * 20e-9)

    def test_zero_taps_rejected(self):
        with pytest.raises(ValueError, match="at least one tap"):
            apply_loss_profile(OPTICAL, 0, 200e-9)


# ============================================================================
# SI PATHS
# ============================================================================


class TestSiPaths:
    def test_power_split_between_los_span_and_tail(self):
        model = SiBandModel(isolation_db=0.0)
        paths = draw_si_paths(model, np.random.default_rng(40))
        power = np.abs(paths.gains) ** 2
        n_span = model.n_clusters * model.n_rays
        kappa = model.rician_factor
        assert power[0] == pytest.approx(kappa / (kappa + 1))
        assert power[1:1 + n_span].sum() == pytest.approx((1 - model.tail_share) / (kappa + 1))
        assert power[1 + n_span:].sum() == pytest.approx(model.tail_share / (kappa + 1))
        assert power.sum() == pytest.approx(1.0)

    def test_tail_rays_arrive_after_the_span(self):
        model = SiBandModel()
        paths = draw_si_paths(model, np.random.default_rng(41))
        n_span = model.n_clusters * model.n_rays
        assert np.all(paths.delays[1:1 + n_span] < model.delay_spread)
        assert np.all(paths.delays[1 + n_span:] >= model.delay_spread)
        assert model.tail_share == pytest.approx(np.exp(-200 / 60))

    def test_no_tail_rays_no_tail_power(self):
        model = SiBandModel(n_tail_rays=0, isolation_db=0.0)
        paths = draw_si_paths(model, np.random.default_rng(42))
        assert model.tail_share == 0.0
        assert len(paths.gains) == 1 + model.n_clusters * model.n_rays
        assert np.sum(np.abs(paths.gains) ** 2) == pytest.approx(1.0)

    def test_isolation_scales_total_power(self):
        paths = draw_si_paths(SiBandModel(isolation_db=55.0), np.random.default_rng(43))
        assert np.sum(np.abs(paths.gains) ** 2) == pytest.approx(10 ** -5.5)


# ============================================================================
# WEIGHT FITTING
# ============================================================================


class TestFitWeights:
    def test_flat_target_single_tap(self):
        gain = 0.5 * 0.8
        c = Canceler(
            delays=np.array([0.0]), coupler_loss=0.5, propagation_loss=np.array([0.8]),
            tap_coupling=np.array([0.9]), band=BAND,
        )
        target = np.full(len(BAND), 0.2 + 0.1j)
        fit = fit_weights(target, c)
        assert_allclose(fit.weights, [(0.2 + 0.1j) / (gain * 0.9)], rtol=1e-10)
        assert fit.residual < 1e-20

    def test_zero_target(self):
        fit = fit_weights(np.zeros(len(BAND)), _canceler([0.0, 5e-9]))
        assert_allclose(fit.weights, 0.0)
        assert fit.residual == 0.0

    def test_matched_taps_recover_target(self):
        rng = np.random.default_rng(4)
        delays = np.arange(5) * 10e-9
        truth = rng.uniform(-0.5, 0.5, 5) + 1j * rng.uniform(-0.5, 0.5, 5)
        target = _canceler(delays, weights=truth).basis(BAND) @ truth
        fit = fit_weights(target, _canceler(delays))
        assert not fit.bounded
        assert fit.residual < 1e-10 * np.sum(np.abs(target) ** 2)
        assert_allclose(fit.weights, truth, atol=1e-8)

    def test_infeasible_target_stays_in_box(self):
        rng = np.random.default_rng(8)
        delays = np.sort(rng.uniform(0, 100e-9, 6))
        c = _canceler(delays, gains=np.full(6, 0.05))
        target = 5.0 * np.exp(-1j * BAND * 3e-9)
        fit = fit_weights(target, c)
        assert fit.bounded
        assert np.all(np.abs(fit.weights.real) <= 1.0)
        assert np.all(np.abs(fit.weights.imag) <= 1.0)
        assert fit.residual <= np.sum(np.abs(target) ** 2)

    def test_grid_too_short_rejected(self):
        short = BAND[:5]
        c = _canceler(np.arange(3) * 1e-9, band=short)
        with pytest.raises(ValueError, match="cannot identify 3 taps"):
            fit_weights(np.ones(5), c)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="band grid"):
            fit_weights(np.ones(7), _canceler([0.0]))

    def test_residual_non_increasing_with_superset_delays(self):
        model = SiBandModel()
        for seed in range(20):
            rng = np.random.default_rng(seed)
            paths = draw_si_paths(model, rng)
            target = paths.response(BAND)
            delays = np.sort(rng.uniform(0, 200e-9, 12))
            gains = rng.uniform(0.01, 1.0, 12)
            residuals = []
            for m in range(1, 13):
                c = _canceler(delays[:m], gains=gains[:m])
                residuals.append(fit_weights(target, c).residual)
            energy = np.sum(np.abs(target) ** 2)
            assert np.all(np.diff(residuals) <= 1e-9 * energy)
            assert residuals[0] <= energy

    def test_fitted_weights_always_in_box(self):
        rng = np.random.default_rng(21)
        model = SiBandModel(isolation_db=0.0)
        for _ in range(10):
            target = draw_si_paths(model, rng).response(BAND)
            c = apply_loss_profile(MICROSTRIP, 20, 200e-9, BAND)
            fit = fit_weights(target, c)
            assert np.all(np.abs(fit.weights.real) <= 1.0)
            assert np.all(np.abs(fit.weights.imag) <= 1.0)
            assert fit.residual <= np.sum(np.abs(target) ** 2)


# ============================================================================
# CANCELLATION
# ============================================================================


class TestCancellation:
    def test_perfect_fit_is_capped(self):
        c = _canceler([0.0], weights=[0.3])
        target = canceler_response(c, BAND)
        assert cancellation_db(target, c) == CANCELLATION_CAP_DB

    def test_zero_weights_give_zero_db(self):
        target = np.exp(-1j * BAND * 1e-9)
        assert cancellation_db(target, _canceler([0.0])) == pytest.approx(0.0)

    def test_invariant_to_global_scaling(self):
        rng = np.random.default_rng(30)
        target = draw_si_paths(SiBandModel(), rng).response(BAND)
        c = apply_loss_profile(OPTICAL, 10, 200e-9, BAND)
        base = cancellation_db(target, c.with_weights(fit_weights(target, c).weights))
        scaled = 0.5 * target
        assert cancellation_db(scaled, c.with_weights(fit_weights(scaled, c).weights)) == pytest.approx(base, abs=1e-6)

    def test_zero_target_rejected(self):
        with pytest.raises(ValueError, match="zero-energy"):
            cancellation_db(np.zeros(len(BAND)), _canceler([0.0]))

    def test_single_cell_sweep_equals_single_fit(self):
        model = SiBandModel()
        grid = sweep_taps_bandwidth(OPTICAL, [20], [400e6], model, 1, np.random.default_rng(3))
        paths = draw_si_paths(model, np.random.default_rng(3))
        target = paths.response(BAND)
        c = apply_loss_profile(OPTICAL, 20, model.delay_spread, BAND)
        direct = cancellation_db(target, c.with_weights(fit_weights(target, c).weights))
        assert grid.shape == (1, 1)
        assert grid[0, 0] == pytest.approx(direct)

    def test_trials_are_seeded(self):
        model = SiBandModel()
        a = cancellation_trials(OPTICAL, [10, 20], [200e6], model, 2, np.random.default_rng(5))
        b = cancellation_trials(OPTICAL, [10, 20], [200e6], model, 2, np.random.default_rng(5))
        assert a.shape == (2, 1, 2)
        np.testing.assert_array_equal(a, b)

    @pytest.mark.slow
    def test_optical_400mhz_100_taps_reaches_about_25_db(self):
        grid = sweep_taps_bandwidth(OPTICAL, [100], [400e6], SiBandModel(), 20, np.random.default_rng(0))
        assert grid[0, 0] == pytest.approx(25.0, abs=5.0)

    @pytest.mark.slow
    def test_microstrip_200mhz_stays_below_15_db(self):
        taps = [10, 20, 40, 60, 80, 100]
        grid = sweep_taps_bandwidth(MICROSTRIP, taps, [200e6], SiBandModel(), 20, np.random.default_rng(0))
        assert grid[0].max() < 15.0
        # insertion loss: the longest line is not the best one
        assert grid[0].max() - grid[0, -1] >= 1.0
