"""Tests for the cluster-ray and self-interference channel models."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.channel import (
    ArrayGeometry,
    ChannelRealization,
    ClusterRayParams,
    SiChannelSpec,
    close_in_path_loss,
    draw_cluster_ray_params,
    dump_realization,
    generate_general_channel,
    generate_si_channel,
    load_realization,
    pulse_energy,
    raised_cosine,
    si_los_matrix,
    si_panel_coords,
    steering_matrix,
    steering_vector,
    subcarrier_tap_gain,
    subcarrier_tap_gains,
)

WAVELENGTH = 3e8 / 28e9
T_S = 1 / 400e6


def _single_path(delay=0.0, gain=1.0, D=16):
    one = np.zeros(1)
    return ClusterRayParams(
        n_clusters=1, n_rays=1,
        mean_azimuth_rx=one, mean_elevation_rx=one, mean_azimuth_tx=one, mean_elevation_tx=one,
        azimuth_rx=np.array([0.3]), elevation_rx=np.array([0.2]),
        azimuth_tx=np.array([-0.4]), elevation_tx=np.array([0.1]),
        gains=np.array([gain], dtype=complex), delays=np.array([delay]), delay_span=D * T_S,
    )


@pytest.fixture
def small_arrays():
    tx = ArrayGeometry.upa(4, 2, WAVELENGTH / 2, n_subarrays=2)
    rx = ArrayGeometry.upa(2, 4, WAVELENGTH / 2, n_subarrays=2)
    return tx, rx


# ============================================================================
# GEOMETRY AND STEERING
# ============================================================================


class TestSteering:
    def test_single_element_is_one(self):
        g = ArrayGeometry.upa(1, 1, WAVELENGTH / 2)
        assert_allclose(steering_vector(g, 0.7, -0.3, WAVELENGTH), [1.0])

    def test_boresight_gives_uniform_phase(self):
        g = ArrayGeometry.upa(4, 4, WAVELENGTH / 2)
        a = steering_vector(g, 1.1, np.pi / 2, WAVELENGTH)
        assert_allclose(a, np.full(16, 0.25), atol=1e-12)

    def test_half_wavelength_pair_along_x(self):
        g = ArrayGeometry.upa(2, 1, WAVELENGTH / 2)
        a = steering_vector(g, 0.0, 0.0, WAVELENGTH)
        assert_allclose(a, np.array([1, -1]) / np.sqrt(2), atol=1e-12)

    def test_unit_norm(self):
        rng = np.random.default_rng(3)
        g = ArrayGeometry.upa(8, 4, WAVELENGTH / 2, n_subarrays=2)
        A = steering_matrix(g, rng.uniform(-np.pi, np.pi, 50), rng.uniform(-np.pi / 2, np.pi / 2, 50), WAVELENGTH)
        assert_allclose(np.linalg.norm(A, axis=0), 1.0, atol=1e-12)

    def test_rejects_non_finite_angles(self):
        g = ArrayGeometry.upa(2, 2, WAVELENGTH / 2)
        with pytest.raises(ValueError, match="finite"):
            steering_vector(g, np.nan, 0.0, WAVELENGTH)

    def test_upa_orders_elements_subarray_major(self):
        g = ArrayGeometry.upa(2, 4, 1.0, n_subarrays=2)
        # first subarray holds columns 0 and 1 only
        assert set(g.element_coords[:4, 1]) == {0.0, 1.0}
        assert set(g.element_coords[4:, 1]) == {2.0, 3.0}
        assert g.subarray_size == 4

    def test_upa_rejects_uneven_split(self):
        with pytest.raises(ValueError, match="subarrays"):
            ArrayGeometry.upa(2, 3, 1.0, n_subarrays=2)

    def test_rejects_elements_off_plane(self):
        coords = np.array([[0.0, 0.0, 0.1]])
        with pytest.raises(ValueError, match="XY-plane"):
            ArrayGeometry(rows=1, cols=1, element_coords=coords, spacing=1.0)


# ============================================================================
# PATH LOSS AND PULSE SHAPING
# ============================================================================


class TestPathLoss:
    def test_reference_distance(self):
        assert close_in_path_loss(1.0, 1.0, WAVELENGTH, 3.4) == pytest.approx((4 * np.pi / WAVELENGTH) ** 2)

    def test_28ghz_one_meter_is_about_61_4_db(self):
        pl_db = 10 * np.log10(close_in_path_loss(1.0, 1.0, WAVELENGTH, 3.4))
        assert pl_db == pytest.approx(61.4, abs=0.05)

    def test_100_meters_adds_34_db_per_decade(self):
        pl_db = 10 * np.log10(close_in_path_loss(100.0, 1.0, WAVELENGTH, 3.4))
        assert pl_db == pytest.approx(61.38 + 68.0, abs=0.05)

    def test_inside_reference_distance_rejected(self):
        with pytest.raises(ValueError, match="inside the reference distance"):
            close_in_path_loss(0.5, 1.0, WAVELENGTH, 3.4)


class TestRaisedCosine:
    def test_peak(self):
        assert raised_cosine(0.0, T_S) == pytest.approx(1.0)

    @pytest.mark.parametrize("rolloff", [0.0, 0.5, 1.0])
    def test_nyquist_zero_crossings(self, rolloff):
        t = np.array([-3, -2, -1, 1, 2, 3]) * T_S
        assert_allclose(raised_cosine(t, T_S, rolloff), 0.0, atol=1e-12)

    def test_removable_singularity(self):
        assert raised_cosine(T_S / 2, T_S, 1.0) == pytest.approx(0.5, abs=1e-12)
        for eps in (1e-4, 1e-6):
            assert raised_cosine(T_S / 2 + eps * T_S, T_S, 1.0) == pytest.approx(0.5, abs=1e-3)

    def test_energy_matches_closed_form(self):
        dt = 1e-3
        t = np.arange(-200, 200, dt) * T_S
        energy = np.sum(raised_cosine(t, T_S, 1.0) ** 2) * dt
        assert energy == pytest.approx(pulse_energy(1.0), rel=1e-3)


class TestSubcarrierTapGain:
    def test_zero_delay_dc(self):
        assert subcarrier_tap_gain(0.0, 0, 64, 16, T_S) == pytest.approx(1.0, abs=1e-12)

    def test_integer_delay_is_pure_phase(self):
        K, m = 64, 5
        for k in (0, 3, 17, 63):
            expected = np.exp(-2j * np.pi * k * m / K)
            assert abs(subcarrier_tap_gain(m * T_S, k, K, 16, T_S) - expected) < 1e-12

    def test_fractional_delay_matches_direct_sum(self):
        K, D, k, tau = 64, 16, 3, 0.5 * T_S
        expected = 0j
        for d in range(D):
            expected += raised_cosine(d * T_S - tau, T_S, 1.0) * np.exp(-2j * np.pi * k * d / K)
        assert abs(subcarrier_tap_gain(tau, k, K, D, T_S) - expected) < 1e-12

    def test_delay_beyond_cyclic_prefix_rejected(self):
        with pytest.raises(ValueError, match="cyclic-prefix"):
            subcarrier_tap_gains(np.array([16 * T_S]), 64, 16, T_S)


# ============================================================================
# GENERAL CHANNEL
# ============================================================================


class TestGeneralChannel:
    def test_single_path_rank_one(self, small_arrays):
        tx, rx = small_arrays
        ch = generate_general_channel(tx, rx, _single_path(), 32, 16, T_S, 1.0, WAVELENGTH)
        a_r = steering_vector(rx, 0.3, 0.2, WAVELENGTH)
        a_t = steering_vector(tx, -0.4, 0.1, WAVELENGTH)
        expected = np.sqrt(rx.n_elements * tx.n_elements) * np.outer(a_r, a_t.conj())
        for k in range(32):
            assert_allclose(ch.per_subcarrier[k], expected, atol=1e-12)
        assert np.linalg.matrix_rank(ch.per_subcarrier[5]) == 1

    def test_reconstructs_from_factors(self, small_arrays):
        tx, rx = small_arrays
        rng = np.random.default_rng(7)
        ch = generate_general_channel(tx, rx, None, 32, 8, T_S, 1e6, WAVELENGTH, rng=rng)
        assert ch.shape == (rx.n_elements, tx.n_elements)
        assert np.all(np.isfinite(ch.per_subcarrier))
        assert_allclose(ch.reconstruct(), ch.per_subcarrier, atol=1e-15)

    def test_realization_is_read_only(self, small_arrays):
        tx, rx = small_arrays
        ch = generate_general_channel(tx, rx, _single_path(), 16, 16, T_S, 1.0, WAVELENGTH)
        with pytest.raises(ValueError):
            ch.per_subcarrier[0, 0, 0] = 0

    def test_rejects_nonpositive_path_loss(self, small_arrays):
        tx, rx = small_arrays
        with pytest.raises(ValueError, match="path loss"):
            generate_general_channel(tx, rx, _single_path(), 8, 16, T_S, 0.0, WAVELENGTH)

    @pytest.mark.slow
    def test_energy_normalization(self, small_arrays):
        """E||H[k]||_F^2 = Nr*Nt/PL times the mean per-path pulse gain."""
        tx, rx = small_arrays
        rng = np.random.default_rng(11)
        K, D, PL = 32, 8, 1e4
        energy, chi_energy = [], []
        for _ in range(500):
            params = draw_cluster_ray_params(8, 10, D * T_S, rng)
            ch = generate_general_channel(tx, rx, params, K, D, T_S, PL, WAVELENGTH)
            energy.append(np.mean(np.sum(np.abs(ch.per_subcarrier) ** 2, axis=(1, 2))))
            chi = subcarrier_tap_gains(params.delays, K, D, T_S)
            chi_energy.append(np.mean(np.abs(chi) ** 2))
        ratio = np.mean(energy) / (rx.n_elements * tx.n_elements / PL * np.mean(chi_energy))
        assert ratio == pytest.approx(1.0, abs=0.1)


class TestClusterRayParams:
    def test_draw_respects_ranges(self):
        rng = np.random.default_rng(0)
        p = draw_cluster_ray_params(8, 10, 40e-9, rng)
        assert p.n_paths == 80
        assert np.all((p.delays >= 0) & (p.delays < 40e-9))
        assert np.all(np.abs(p.elevation_rx) <= np.pi / 2)
        assert np.all(np.abs(p.azimuth_tx) <= np.pi)

    def test_wrong_length_rejected(self):
        rng = np.random.default_rng(0)
        p = draw_cluster_ray_params(2, 2, 1e-8, rng)
        with pytest.raises(ValueError, match="gains must have 4 entries"):
            ClusterRayParams(
                n_clusters=2, n_rays=2,
                mean_azimuth_rx=p.mean_azimuth_rx, mean_elevation_rx=p.mean_elevation_rx,
                mean_azimuth_tx=p.mean_azimuth_tx, mean_elevation_tx=p.mean_elevation_tx,
                azimuth_rx=p.azimuth_rx, elevation_rx=p.elevation_rx,
                azimuth_tx=p.azimuth_tx, elevation_tx=p.elevation_tx,
                gains=p.gains[:3], delays=p.delays, delay_span=1e-8,
            )


# ============================================================================
# SELF-INTERFERENCE CHANNEL
# ============================================================================


class TestSiChannel:
    def test_single_elements_at_distance(self):
        g = ArrayGeometry.upa(1, 1, WAVELENGTH / 2)
        for r in (0.1, 0.37):
            spec = SiChannelSpec(rician_factor=10.0, tx_rx_separation=r, separation_angle=0.0)
            R = si_los_matrix(g, g, spec, WAVELENGTH)
            assert R.shape == (1, 1)
            assert abs(R[0, 0]) == pytest.approx(1 / r)
            assert_allclose(np.angle(R[0, 0] * np.exp(2j * np.pi * r / WAVELENGTH)), 0.0, atol=1e-9)

    def test_panel_pose(self, small_arrays):
        tx, rx = small_arrays
        spec = SiChannelSpec(rician_factor=10.0)
        rx_world, tx_world = si_panel_coords(tx, rx, spec)
        assert_allclose(rx_world.mean(axis=0), 0.0, atol=1e-15)
        assert_allclose(tx_world.mean(axis=0), [0.0, 0.0, 0.1], atol=1e-15)
        # rotation keeps intra-panel spacing
        d_local = np.linalg.norm(tx.element_coords[0] - tx.element_coords[-1])
        assert np.linalg.norm(tx_world[0] - tx_world[-1]) == pytest.approx(d_local)

    def test_amplitude_matches_pairwise_distances(self, small_arrays):
        tx, rx = small_arrays
        spec = SiChannelSpec(rician_factor=10.0)
        R = si_los_matrix(tx, rx, spec, WAVELENGTH)
        rx_world, tx_world = si_panel_coords(tx, rx, spec)
        for p in range(rx.n_elements):
            for q in range(tx.n_elements):
                r_pq = np.sqrt(np.sum((rx_world[p] - tx_world[q]) ** 2))
                assert abs(R[p, q]) == pytest.approx(1 / r_pq, rel=1e-12)

    def test_doubling_distances_halves_amplitudes(self):
        small = (ArrayGeometry.upa(2, 2, 0.002), ArrayGeometry.upa(2, 2, 0.002))
        large = (ArrayGeometry.upa(2, 2, 0.004), ArrayGeometry.upa(2, 2, 0.004))
        R1 = si_los_matrix(*small, SiChannelSpec(10.0, tx_rx_separation=0.1), WAVELENGTH)
        R2 = si_los_matrix(*large, SiChannelSpec(10.0, tx_rx_separation=0.2), WAVELENGTH)
        assert_allclose(np.abs(R2), np.abs(R1) / 2, rtol=1e-12)

    def test_infinite_rician_factor_is_pure_los(self, small_arrays):
        tx, rx = small_arrays
        rng = np.random.default_rng(1)
        ch = generate_si_channel(SiChannelSpec(rician_factor=np.inf), tx, rx, 16, 4, T_S, WAVELENGTH, rng)
        for k in range(16):
            assert_allclose(ch.per_subcarrier[k], ch.los, atol=1e-12)

    def test_subcarrier_difference_has_no_los(self, small_arrays):
        tx, rx = small_arrays
        rng = np.random.default_rng(2)
        ch = generate_si_channel(SiChannelSpec(rician_factor=10.0), tx, rx, 16, 4, T_S, WAVELENGTH, rng)
        nlos = (ch.steering_rx[None, :, :] * ch.path_gains[:, None, :]) @ ch.steering_tx.conj().T
        w_nlos = np.sqrt(1 / 11.0)
        assert_allclose(ch.per_subcarrier[3] - ch.per_subcarrier[9], w_nlos * (nlos[3] - nlos[9]), atol=1e-9)
        assert_allclose(ch.reconstruct(), ch.per_subcarrier, atol=1e-9)

    @pytest.mark.slow
    def test_los_to_nlos_power_ratio_is_rician_factor(self, small_arrays):
        tx, rx = small_arrays
        kappa = 10.0
        w_los, w_nlos = np.sqrt(kappa / (kappa + 1)), np.sqrt(1 / (kappa + 1))
        rng = np.random.default_rng(5)
        los_power, nlos_power = [], []
        for _ in range(200):
            ch = generate_si_channel(SiChannelSpec(rician_factor=kappa), tx, rx, 32, 8, T_S, WAVELENGTH, rng)
            scattered = ch.per_subcarrier - w_los * ch.los[None]
            los_power.append(w_los ** 2 * np.sum(np.abs(ch.los) ** 2))
            nlos_power.append(np.mean(np.sum(np.abs(scattered) ** 2, axis=(1, 2))))
        assert np.mean(los_power) / np.mean(nlos_power) == pytest.approx(kappa, rel=0.15)
        assert w_nlos > 0

    def test_rejects_nonpositive_rician_factor(self):
        with pytest.raises(ValueError, match="Rician factor"):
            SiChannelSpec(rician_factor=0.0)


# ============================================================================
# REGRESSION DUMPS
# ============================================================================


class TestDumps:
    @pytest.fixture
    def realization(self, small_arrays):
        tx, rx = small_arrays
        rng = np.random.default_rng(9)
        return generate_general_channel(tx, rx, None, 8, 4, T_S, 123.0, WAVELENGTH, rng=rng)

    @pytest.mark.parametrize("suffix", [".json", ".bin"])
    def test_round_trip(self, realization, tmp_path, suffix):
        path = dump_realization(realization, tmp_path / f"h{suffix}")
        loaded = load_realization(path)
        assert isinstance(loaded, ChannelRealization)
        assert loaded.path_loss_linear == 123.0
        assert_allclose(loaded.per_subcarrier, realization.per_subcarrier, rtol=0, atol=0)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOPE" + bytes(32))
        with pytest.raises(ValueError, match="bad magic"):
            load_realization(path)

    def test_missing_file_names_path(self, tmp_path):
        with pytest.raises(RuntimeError, match="missing.bin"):
            load_realization(tmp_path / "missing.bin")
