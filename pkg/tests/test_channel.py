"""Channel model: array manifold, Rician mixing, path gain, DFT
codebook, beam selection and pass geometry."""

import math

import numpy as np
import pytest

from leorzf import channel as ch
from leorzf.config import ScenarioConfig
from leorzf.errors import BelowMinElevationError, UnsupportedGeometryError

WAVELENGTH = ch.SPEED_OF_LIGHT_M_S / 18e9


def make_geom(n_x=4, n_y=4):
    return ch.ArrayGeometry.uniform_planar(n_x, n_y, WAVELENGTH, 0.5)


class TestArrayManifold:
    def test_boresight_all_phases_zero(self):
        geom = make_geom()
        a = ch.array_manifold(0.0, 0.0, geom, WAVELENGTH)
        assert np.allclose(a, np.full(16, 0.25))

    def test_single_element(self):
        geom = ch.ArrayGeometry.uniform_planar(1, 1, WAVELENGTH, 0.5)
        a = ch.array_manifold(0.7, 1.1, geom, WAVELENGTH)
        assert np.allclose(a, [1.0])

    def test_scalar_phase_oracle(self):
        # Element-by-element phase loop, no vectorized shortcuts.
        geom = make_geom()
        theta, phi = math.radians(30.0), math.radians(45.0)
        a = ch.array_manifold(theta, phi, geom, WAVELENGTH)
        kx = (2 * math.pi / WAVELENGTH) * math.sin(theta) * math.cos(phi)
        ky = (2 * math.pi / WAVELENGTH) * math.sin(theta) * math.sin(phi)
        kz = (2 * math.pi / WAVELENGTH) * math.cos(theta)
        for m, (x, y, z) in enumerate(geom.element_positions):
            phase = kx * x + ky * y + kz * z
            expected = complex(math.cos(phase), math.sin(phase)) / 4.0
            assert abs(a[m] - expected) < 1e-12

    def test_unit_norm_over_random_angles(self):
        geom = make_geom(8, 2)
        rng = np.random.default_rng(0)
        for _ in range(50):
            theta = rng.uniform(0, np.pi / 2)
            phi = rng.uniform(-np.pi, np.pi)
            a = ch.array_manifold(theta, phi, geom, WAVELENGTH)
            assert abs(np.linalg.norm(a) - 1.0) < 1e-12

    def test_batched_rows_are_conjugated_manifolds(self):
        geom = make_geom()
        thetas = np.array([0.3, 0.8])
        phis = np.array([-1.0, 2.0])
        rows = ch._manifold_rows(thetas, phis, geom, WAVELENGTH)
        for n in range(2):
            a = ch.array_manifold(thetas[n], phis[n], geom, WAVELENGTH)
            assert np.allclose(rows[n], a.conj(), atol=1e-14)


class TestRicianChannel:
    def test_pure_los_limit(self):
        rng = np.random.default_rng(1)
        h_los = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        h = ch.rician_channel(h_los, 1e15, rng)  # capped at 1e12
        assert np.linalg.norm(h - h_los) / np.linalg.norm(h_los) < 1e-5

    def test_pure_nlos_moment(self):
        rng = np.random.default_rng(2)
        h_los = np.ones(16, complex) * 2.0
        target = np.linalg.norm(h_los) ** 2
        powers = [np.linalg.norm(ch.rician_channel(h_los, 0.0, rng)) ** 2
                  for _ in range(10_000)]
        assert abs(np.mean(powers) / target - 1.0) < 0.05

    def test_k10db_power_ratio(self):
        # Empirical LOS/NLOS split at the reference Rician factor.
        rng = np.random.default_rng(3)
        h_los = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        K_R = 10.0 ** (10.0 / 10.0)
        los_part = math.sqrt(K_R / (K_R + 1.0)) * h_los
        nlos_power = [np.linalg.norm(ch.rician_channel(h_los, K_R, rng) - los_part) ** 2
                      for _ in range(10_000)]
        ratio_dB = 10 * np.log10(np.linalg.norm(los_part) ** 2 / np.mean(nlos_power))
        assert abs(ratio_dB - 10.0) < 0.5

    def test_mixture_power_preserved(self):
        rng = np.random.default_rng(4)
        h_los = 3.0 * (rng.standard_normal(8) + 1j * rng.standard_normal(8))
        target = np.linalg.norm(h_los) ** 2
        powers = [np.linalg.norm(ch.rician_channel(h_los, 10.0, rng)) ** 2
                  for _ in range(10_000)]
        assert abs(np.mean(powers) / target - 1.0) < 0.05

    def test_negative_factor_rejected(self):
        with pytest.raises(ValueError):
            ch.rician_channel(np.ones(4, complex), -1.0, np.random.default_rng(0))


class TestLosGain:
    UT = ch.UserTerminal(lat_deg=0, lon_deg=0, antenna_gain_dBi=0.0)

    def test_reference_distance_zero_loss(self):
        d = WAVELENGTH / (4 * math.pi)
        gain = ch.los_gain(d, 18e9, 1.0, self.UT)
        assert abs(20 * math.log10(gain)) < 1e-9

    def test_600km_18ghz_fspl(self):
        gain = ch.los_gain(600e3, 18e9, 1.0, self.UT)
        assert abs(-20 * math.log10(gain) - 173.1) < 0.1

    def test_inverse_square_law(self):
        g1 = ch.los_gain(600e3, 18e9, 1.0, self.UT)
        g2 = ch.los_gain(1200e3, 18e9, 1.0, self.UT)
        assert abs(20 * math.log10(g1 / g2) - 6.02) < 0.01

    def test_antenna_gain_and_losses_combine(self):
        ut = ch.UserTerminal(lat_deg=0, lon_deg=0, antenna_gain_dBi=39.7)
        base = ch.los_gain(600e3, 18e9, 1.0, self.UT)
        with_gain = ch.los_gain(600e3, 18e9, 1.0, ut, extra_loss_dB=3.0)
        assert abs(20 * math.log10(with_gain / base) - (39.7 - 3.0)) < 1e-9

    def test_power_share_in_amplitude(self):
        g_full = ch.los_gain(600e3, 18e9, 1.0, self.UT)
        g_half = ch.los_gain(600e3, 18e9, 0.5, self.UT)
        assert abs(g_half / g_full - math.sqrt(0.5)) < 1e-12


class TestDftCodebook:
    def test_two_element_line(self):
        geom = ch.ArrayGeometry.uniform_planar(2, 1, WAVELENGTH, 0.5)
        C = ch.dft_codebook(geom)
        inv_sqrt2 = 1 / math.sqrt(2)
        assert np.allclose(C[:, 0], [inv_sqrt2, inv_sqrt2])
        assert np.allclose(C[:, 1], [inv_sqrt2, -inv_sqrt2])

    def test_full_array_orthonormal(self):
        geom = make_geom(16, 16)
        C = ch.dft_codebook(geom)
        assert C.shape == (256, 256)
        gram = C.conj().T @ C
        assert np.abs(gram - np.eye(256)).max() < 1e-10

    def test_unit_norm_codewords(self):
        C = ch.dft_codebook(make_geom(4, 2))
        assert np.allclose(np.linalg.norm(C, axis=0), 1.0)

    def test_non_grid_rejected(self):
        geom = make_geom()
        geom.is_uniform_grid = False
        with pytest.raises(UnsupportedGeometryError):
            ch.dft_codebook(geom)

    def test_boresight_manifold_is_a_codeword(self):
        geom = make_geom()
        C = ch.dft_codebook(geom)
        a = ch.array_manifold(0.0, 0.0, geom, WAVELENGTH)
        assert np.abs(np.abs(a.conj() @ C) - np.concatenate([[1], np.zeros(15)])).max() < 1e-12


class TestSelectBeams:
    def test_exact_codeword_match(self):
        geom = make_geom()
        C = ch.dft_codebook(geom)
        H_tilde = C[:, 7].conj()[None, :]  # UT whose manifold is codeword 7
        F = ch.select_beams(H_tilde, C, 1)
        assert np.allclose(F[:, 0], C[:, 7])

    def test_collision_gets_second_best(self):
        geom = make_geom()
        C = ch.dft_codebook(geom)
        rng = np.random.default_rng(5)
        row = (rng.standard_normal(16) + 1j * rng.standard_normal(16))
        row /= np.linalg.norm(row)
        H_tilde = np.stack([row, row])  # identical channels
        F = ch.select_beams(H_tilde, C, 2)
        power = np.abs(row @ C) ** 2
        order = np.argsort(-power, kind="stable")
        assert np.allclose(F[:, 0], C[:, order[0]])
        assert np.allclose(F[:, 1], C[:, order[1]])

    def test_matches_exhaustive_search_oracle(self):
        geom = make_geom()
        C = ch.dft_codebook(geom)
        rng = np.random.default_rng(6)
        H_tilde = rng.standard_normal((4, 16)) + 1j * rng.standard_normal((4, 16))
        F = ch.select_beams(H_tilde, C, 4)
        taken = set()
        for n in range(4):
            best, best_p = None, -1.0
            for j in range(C.shape[1]):  # brute force over all codewords
                if j in taken:
                    continue
                p = abs(H_tilde[n] @ C[:, j]) ** 2
                if p > best_p + 1e-15:
                    best, best_p = j, p
            taken.add(best)
            assert np.allclose(F[:, n], C[:, best])

    def test_fill_columns_and_no_duplicates(self):
        geom = make_geom()
        C = ch.dft_codebook(geom)
        rng = np.random.default_rng(7)
        H_tilde = rng.standard_normal((2, 16)) + 1j * rng.standard_normal((2, 16))
        F = ch.select_beams(H_tilde, C, 6)
        assert F.shape == (16, 6)
        gram = np.abs(F.conj().T @ F)
        assert np.allclose(gram, np.eye(6), atol=1e-10)  # distinct DFT columns

    def test_fft_powers_agree_with_gemm(self):
        geom = make_geom(8, 4)
        C = ch.dft_codebook(geom)
        rng = np.random.default_rng(8)
        H_tilde = rng.standard_normal((3, 32)) + 1j * rng.standard_normal((3, 32))
        p_fft = ch.dft_beam_powers(H_tilde, geom)
        p_gemm = np.abs(H_tilde @ C) ** 2
        assert np.allclose(p_fft, p_gemm, atol=1e-12)
        assert np.array_equal(ch.select_beams(H_tilde, C, 3, powers=p_fft),
                              ch.select_beams(H_tilde, C, 3))


def default_scenario(**kw):
    return ScenarioConfig(**kw).validate()


class TestPropagatePass:
    def test_overhead_ut_sees_nadir(self):
        cfg = default_scenario()
        ut = ch.UserTerminal(lat_deg=0.0, lon_deg=0.0)
        orbit = ch.propagate_pass(cfg, [ut], 60.0)
        assert abs(orbit.theta_rad[0]) < 1e-9
        assert abs(orbit.slant_range_m[0] - 600e3) < 1.0
        assert abs(orbit.elevation_rad[0] - np.pi / 2) < 1e-9

    def test_orbital_speed(self):
        v = ch.orbital_angular_rate(600e3) * (ch.EARTH_RADIUS_M + 600e3)
        assert abs(v - 7560.0) < 10.0  # sqrt(mu / (R_E + h))

    def test_angle_continuity(self):
        cfg = default_scenario()
        uts = [ch.UserTerminal(lat_deg=0.5, lon_deg=0.3),
               ch.UserTerminal(lat_deg=-0.4, lon_deg=-0.8)]
        a = ch.propagate_pass(cfg, uts, 30.0)
        b = ch.propagate_pass(cfg, uts, 30.0 + 1e-4)
        assert np.abs(b.theta_rad - a.theta_rad).max() < 1e-5
        assert np.abs(b.slant_range_m - a.slant_range_m).max() < 10.0

    def test_slant_range_at_least_altitude(self):
        cfg = default_scenario()
        uts = [ch.UserTerminal(lat_deg=1.0, lon_deg=-1.5)]
        for t in (0.0, 30.0, 90.0, 120.0):
            orbit = ch.propagate_pass(cfg, uts, t)
            assert orbit.slant_range_m[0] >= cfg.altitude_m

    def test_below_elevation_mask_raises(self):
        cfg = default_scenario()
        far_ut = ch.UserTerminal(lat_deg=0.0, lon_deg=40.0)
        with pytest.raises(BelowMinElevationError):
            ch.propagate_pass(cfg, [far_ut], 60.0)

    def test_outside_pass_rejected(self):
        cfg = default_scenario()
        with pytest.raises(ValueError):
            ch.propagate_pass(cfg, [ch.UserTerminal(0, 0)], 121.0)


class TestSnapshot:
    def test_los_only_best_beam_magnitudes(self):
        # Nadir UT, LOS-only: unit-gain effective row peaks at 1 on its
        # own beam and the faded channel row peaks at the LOS amplitude.
        cfg = default_scenario(K=1, N_RF=1, K_R_dB=120.0)
        rng = np.random.default_rng(9)
        ctx = ch.PassContext(
            scenario=cfg,
            uts=[ch.UserTerminal(0.0, 0.0, antenna_gain_dBi=cfg.ut_gain_dBi,
                                 rician_K_dB=120.0)],
            geometry=ch.ArrayGeometry.uniform_planar(16, 16, ch.SPEED_OF_LIGHT_M_S / cfg.carrier_Hz, 0.5),
            codebook=None,
            wavelength_m=ch.SPEED_OF_LIGHT_M_S / cfg.carrier_Hz,
        )
        ctx.codebook = ch.dft_codebook(ctx.geometry)
        sn = ch.snapshot(ctx, 60.0, rng)
        gamma = ch.los_gain(600e3, cfg.carrier_Hz, 1.0, ctx.uts[0])
        assert abs(np.abs(sn.H_eff[0, 0]) - 1.0) < 1e-9
        full_row = sn.H @ sn.F_RF
        assert abs(np.abs(full_row[0, 0]) - gamma) / gamma < 1e-4

    def test_identical_uts_identical_manifold_rows(self):
        cfg = default_scenario(K=2)
        rng = np.random.default_rng(10)
        uts = [ch.UserTerminal(0.1, 0.2), ch.UserTerminal(0.1, 0.2)]
        ctx = ch.PassContext(
            scenario=cfg, uts=uts,
            geometry=ch.ArrayGeometry.uniform_planar(16, 16, ch.SPEED_OF_LIGHT_M_S / cfg.carrier_Hz, 0.5),
            codebook=None, wavelength_m=ch.SPEED_OF_LIGHT_M_S / cfg.carrier_Hz,
        )
        ctx.codebook = ch.dft_codebook(ctx.geometry)
        sn = ch.snapshot(ctx, 20.0, rng)
        assert np.array_equal(sn.H_tilde[0], sn.H_tilde[1])

    def test_manifold_rows_unit_norm_and_stored_product(self):
        cfg = default_scenario(K=4)
        rng = np.random.default_rng(11)
        ctx = ch.make_pass(cfg, rng)
        sn = ch.snapshot(ctx, 45.0, rng)
        assert np.allclose(np.linalg.norm(sn.H_tilde, axis=1), 1.0, atol=1e-12)
        assert np.array_equal(sn.H_eff, sn.H_tilde @ sn.F_RF)
        assert np.allclose(np.linalg.norm(sn.F_RF, axis=0), 1.0, atol=1e-12)

    def test_geometry_deterministic_nlos_from_rng_only(self):
        cfg = default_scenario(K=3)
        ctx = ch.make_pass(cfg, np.random.default_rng(12))
        sn1 = ch.snapshot(ctx, 10.0, np.random.default_rng(77))
        sn2 = ch.snapshot(ctx, 10.0, np.random.default_rng(77))
        sn3 = ch.snapshot(ctx, 10.0, np.random.default_rng(78))
        assert np.array_equal(sn1.H, sn2.H)
        assert np.array_equal(sn1.H_tilde, sn3.H_tilde)  # geometry rng-free
        assert not np.array_equal(sn1.H, sn3.H)

    def test_perturbation_rank_premise(self):
        # Consecutive 50 ms effective-channel deltas stay low-rank: the
        # median 90%-energy arSVD rank must be below K/2.
        from leorzf.lowrank import ArSvdConfig, arsvd, gram_delta

        cfg = default_scenario()
        rng = np.random.default_rng(13)
        ctx = ch.make_pass(cfg, rng)
        acfg = ArSvdConfig(eta=0.9, k_init=cfg.k_init, p=cfg.p, i_max=cfg.i_max)
        sketch_rng = np.random.default_rng(14)
        ranks = []
        prev = None
        for i in range(240):  # 12 s mid-pass segment
            sn = ch.snapshot(ctx, 54.0 + i / cfg.update_rate_Hz, rng)
            if prev is not None:
                dA = gram_delta(prev.H_eff, sn.H_eff - prev.H_eff)
                ranks.append(arsvd(dA, acfg, sketch_rng).k_est)
            prev = sn
        assert np.median(ranks) < cfg.K / 2
