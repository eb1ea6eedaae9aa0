import math

import numpy as np
import pytest

from chansim import (
    ArrayConfig,
    CdlLink,
    generate_cdl_dataset,
    get_profile,
    load_profile,
    mc_cdl_covariance,
    sample_mean_cov,
    steering_vector,
    ula_config,
)
from chansim.cdl import RAY_OFFSETS, draw_ray_angles, steering_matrix
from chansim.diagnostics import fingerprint_pmf, gaussianity_report, total_variation
from chansim.errors import ArgumentError, StructuralError
from conftest import WAVELENGTH_3P5, rel_fro


def one_cluster(spreads=(0, 0, 0, 0), rays=20, angles=(30.0, -40.0, 80.0, 100.0), k_db=None):
    doc = {"kind": "cdl", "name": "one", "k_factor_db": k_db, "rays_per_cluster": rays,
           "spreads_deg": dict(zip(("asd", "asa", "zsd", "zsa"), spreads)),
           "clusters": [{"power": 1.0, "aod_deg": angles[0], "aoa_deg": angles[1], "zod_deg": angles[2],
                         "zoa_deg": angles[3], "is_los": k_db is not None}]}
    return load_profile(doc)


class TestArrays:
    def test_broadside_all_ones(self):
        arr = ula_config(8, 0.5, 1.0)
        assert np.allclose(steering_vector(arr, math.pi / 2, math.pi / 2), 1.0)
        assert np.allclose(steering_vector(arr, 0.3, 0.0), 1.0)

    def test_two_element_endfire(self):
        arr = ula_config(2, 0.5, 1.0)
        assert np.allclose(steering_vector(arr, 0.0, math.pi / 2), [1, -1], atol=1e-12)

    def test_unit_modulus(self):
        rng = np.random.default_rng(0)
        arr = ArrayConfig(rng.standard_normal((5, 3)), 0.1)
        for _ in range(10):
            v = steering_vector(arr, rng.uniform(-math.pi, math.pi), rng.uniform(0, math.pi))
            assert np.allclose(np.abs(v), 1.0)

    def test_ula_geometry(self):
        arr = ula_config(16, 0.5, WAVELENGTH_3P5)
        assert np.allclose(arr.element_positions[:, 0], np.arange(16) * WAVELENGTH_3P5 / 2)
        assert np.all(arr.element_positions[:, 1:] == 0)
        assert np.diff(arr.element_positions[:, 0])[0] == pytest.approx(WAVELENGTH_3P5 / 2)
        assert np.array_equal(ula_config(1, 0.5, 1.0).element_positions, np.zeros((1, 3)))

    def test_invalid(self):
        with pytest.raises(StructuralError):
            ArrayConfig(np.zeros((3, 2)), 1.0)
        with pytest.raises(ArgumentError):
            ArrayConfig(np.zeros((3, 3)), 0.0)
        with pytest.raises(ArgumentError):
            ula_config(0)


class TestRayAngles:
    def test_zero_spread(self):
        c = one_cluster().clusters[0]
        for mode in ("iid-laplacian", "fixed-offsets"):
            a = draw_ray_angles(c, (0, 0, 0, 0), mode, np.random.default_rng(0))
            assert a.n_rays == 20
            for got, want in zip((a.aod, a.aoa, a.zod, a.zoa), c.angles_rad):
                assert np.allclose(got, want)

    def test_laplacian_moments(self):
        c = one_cluster().clusters[0]
        a = draw_ray_angles(c, (5, 11, 3, 3), "iid-laplacian", np.random.default_rng(1), n_rays=100000)
        for got, mean, sd in zip((a.aod, a.aoa), c.angles_rad[:2], np.deg2rad([5, 11])):
            assert abs(got.mean() - mean) <= 3 * sd / math.sqrt(100000)
            assert got.std() == pytest.approx(sd, rel=0.02)

    def test_fixed_offsets_are_permuted_table(self):
        c = one_cluster(angles=(0.0, 0.0, 90.0, 90.0)).clusters[0]
        a = draw_ray_angles(c, (5, 11, 3, 3), "fixed-offsets", np.random.default_rng(2))
        assert np.allclose(np.sort(np.rad2deg(a.aod)), np.sort(RAY_OFFSETS * 5))
        assert np.allclose(np.sort(np.rad2deg(a.aoa)), np.sort(RAY_OFFSETS * 11))
        assert not np.allclose(np.rad2deg(a.aod) / 5, np.rad2deg(a.aoa) / 11)

    def test_zenith_clipped(self):
        c = one_cluster(angles=(0.0, 0.0, 1.0, 179.0)).clusters[0]
        a = draw_ray_angles(c, (0, 0, 30, 30), "iid-laplacian", np.random.default_rng(3), n_rays=1000)
        assert a.zod.min() >= 0 and a.zoa.max() <= math.pi

    def test_unknown_mode(self):
        with pytest.raises(ArgumentError):
            draw_ray_angles(one_cluster().clusters[0], (1, 1, 1, 1), "gaussian", np.random.default_rng(0))


class TestGeneration:
    def test_rank_one_random_phase(self):
        p = one_cluster(rays=1)
        tx, rx = ula_config(4, 0.5, 1.0), ula_config(2, 0.5, 1.0)
        ds = generate_cdl_dataset(p, tx, rx, 200, seed=1)
        norms = np.linalg.norm(ds.samples, axis=1)
        assert np.allclose(norms, norms[0])
        phases = np.angle(ds.samples[:, 0])
        assert np.std(np.cos(phases)) > 0.5

    def test_rx_major_layout(self):
        p = one_cluster(rays=1)
        tx, rx = ula_config(4, 0.5, 1.0), ula_config(3, 0.5, 1.0)
        h = generate_cdl_dataset(p, tx, rx, 1, seed=2).samples[0]
        c = p.clusters[0]
        a_tx = steering_vector(tx, math.radians(c.aod_deg), math.radians(c.zod_deg))
        a_rx = steering_vector(rx, math.radians(c.aoa_deg), math.radians(c.zoa_deg))
        ref = np.kron(a_rx, a_tx)
        ratio = h / ref
        assert np.allclose(ratio, ratio[0])
        assert np.allclose(h.reshape(3, 4), ratio[0] * np.outer(a_rx, a_tx))

    def test_zero_mean(self, mimo_arrays):
        tx, rx = mimo_arrays
        n = 20000
        ds = generate_cdl_dataset(get_profile("cdl-a"), tx, rx, n, seed=3)
        assert np.linalg.norm(ds.samples.mean(axis=0)) <= 3 * math.sqrt(128 / n)

    def test_frozen_angles_match_link_covariance(self, mimo_arrays):
        tx, rx = mimo_arrays
        link = CdlLink(get_profile("cdl-b"), tx, rx, angle_seed=4)
        ds = link.generate(20000, seed=5)
        assert rel_fro(sample_mean_cov(ds).covariance, link.covariance().covariance) <= 0.1

    def test_angle_seed_changes_instance(self, mimo_arrays):
        tx, rx = mimo_arrays
        a = CdlLink(get_profile("cdl-a"), tx, rx, angle_seed=0).ray_steering
        b = CdlLink(get_profile("cdl-a"), tx, rx, angle_seed=1).ray_steering
        assert not np.allclose(a, b)

    def test_global_phase_invariance(self, mimo_arrays):
        tx, rx = mimo_arrays
        ds = generate_cdl_dataset(get_profile("cdl-c"), tx, rx, 2000, seed=6)
        c1 = sample_mean_cov(ds).covariance
        c2 = sample_mean_cov(ds.samples * np.exp(0.7j)).covariance
        assert np.max(np.abs(c1 - c2)) <= 1e-12 * np.max(np.abs(c1))

    def test_ray_cross_covariance_vanishes(self):
        # two rays of one cluster: E[rho_1 conj(rho_2)] -> 0 at O(1/sqrt(n))
        p = one_cluster(spreads=(10, 10, 5, 5), rays=2)
        tx, rx = ula_config(1, 0.5, 1.0), ula_config(1, 0.5, 1.0)
        link = CdlLink(p, tx, rx)
        n = 40000
        h = link.generate(n, seed=7).samples[:, 0]
        # single-element arrays: h = w (e^{j b1} + e^{j b2}); E|h|^2 = 2 w^2 iff the cross term vanishes
        w2 = link.ray_weights[0] ** 2
        assert np.mean(np.abs(h) ** 2) == pytest.approx(2 * w2, abs=4 * 2 * w2 / math.sqrt(n))

    def test_los_cluster(self):
        p = one_cluster(rays=20, spreads=(5, 5, 3, 3), k_db=200.0)
        tx, rx = ula_config(4, 0.5, 1.0), ula_config(2, 0.5, 1.0)
        ds = generate_cdl_dataset(p, tx, rx, 50, seed=8)
        assert np.allclose(np.linalg.norm(ds.samples, axis=1), math.sqrt(8), rtol=1e-6)

    def test_worker_invariance(self, mimo_arrays):
        tx, rx = mimo_arrays
        a = generate_cdl_dataset(get_profile("cdl-d"), tx, rx, 2100, seed=9, workers=1)
        b = generate_cdl_dataset(get_profile("cdl-d"), tx, rx, 2100, seed=9, workers=3)
        assert a.samples.tobytes() == b.samples.tobytes()

    def test_redraw_mode_differs(self, mimo_arrays):
        tx, rx = mimo_arrays
        frozen = generate_cdl_dataset(get_profile("cdl-a"), tx, rx, 5, seed=10)
        redraw = generate_cdl_dataset(get_profile("cdl-a"), tx, rx, 5, seed=10, redraw_angles=True)
        assert redraw.provenance["redraw_angles"] and not np.allclose(frozen.samples, redraw.samples)

    def test_rejects_tdl_profile(self, mimo_arrays):
        with pytest.raises(ArgumentError):
            generate_cdl_dataset(get_profile("tdl-a"), *mimo_arrays, 1, 0)


class TestMonteCarloCovariance:
    def test_zero_spread_rank_one(self):
        p = one_cluster()
        tx, rx = ula_config(4, 0.5, 1.0), ula_config(3, 0.5, 1.0)
        c = p.clusters[0]
        a_tx = steering_vector(tx, math.radians(c.aod_deg), math.radians(c.zod_deg))
        a_rx = steering_vector(rx, math.radians(c.aoa_deg), math.radians(c.zoa_deg))
        want = np.kron(np.outer(a_rx, a_rx.conj()), np.outer(a_tx, a_tx.conj()))
        got = mc_cdl_covariance(p, tx, rx, 5, seed=0).covariance
        assert np.allclose(got, want, atol=1e-12)
        assert np.linalg.matrix_rank(got, tol=1e-9) == 1

    @pytest.mark.parametrize("name", ["cdl-a", "cdl-d"])
    def test_trace(self, name, mimo_arrays):
        cov = mc_cdl_covariance(get_profile(name), *mimo_arrays, 10, seed=1)
        assert np.trace(cov.covariance).real == pytest.approx(128, rel=1e-10)
        assert np.linalg.eigvalsh(cov.covariance).min() >= -1e-10

    def test_convergence(self):
        tx, rx = ula_config(8, 0.5, 1.0), ula_config(4, 0.5, 1.0)
        p = get_profile("cdl-b")
        ref = mc_cdl_covariance(p, tx, rx, 640, seed=99).covariance
        errs = [rel_fro(mc_cdl_covariance(p, tx, rx, n, seed=3).covariance, ref) for n in (8, 32, 128)]
        assert errs[0] > errs[1] > errs[2]

    def test_invalid_draws(self, mimo_arrays):
        with pytest.raises(ArgumentError):
            mc_cdl_covariance(get_profile("cdl-a"), *mimo_arrays, 0, seed=0)


@pytest.mark.slow
class TestCentralLimit:
    """Redraw-per-realization data vs the Gaussian with the Monte-Carlo covariance.

    Run on the 16x8 geometry: the fingerprint needs that angular resolution
    to separate a single random ray from its Gaussian counterpart.
    """

    def test_many_rays_are_gaussian(self, mimo_arrays):
        tx, rx = mimo_arrays
        p = get_profile("cdl-a")
        ds = generate_cdl_dataset(p, tx, rx, 10000, seed=11, redraw_angles=True)
        ref = mc_cdl_covariance(p, tx, rx, 400, seed=12)
        rep = gaussianity_report(ds, 0.01, seed=13, reference=ref)
        assert rep.tv_vs_gaussian <= 1.5 * rep.tv_noise_floor

    def test_single_ray_single_cluster_is_not(self, mimo_arrays):
        tx, rx = mimo_arrays
        p = one_cluster(spreads=(5, 11, 3, 3), rays=1)
        ds = generate_cdl_dataset(p, tx, rx, 10000, seed=14, redraw_angles=True)
        ref = mc_cdl_covariance(p, tx, rx, 4000, seed=15)
        rep = gaussianity_report(ds, 0.01, seed=16, reference=ref)
        assert rep.tv_vs_gaussian >= 3 * rep.tv_noise_floor
        assert rep.verdict == "non-gaussian"
