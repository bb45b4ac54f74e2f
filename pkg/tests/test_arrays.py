"""Array model: steering vectors, mismatch draws, snapshot statistics."""

import numpy as np
import pytest

from beamsim import (
    AccumulatedPhaseMismatch,
    ArrayGeometry,
    FixedSteeringVector,
    IncoherentScatteringMismatch,
    NoMismatch,
    ScatterSet,
    SnapshotBatch,
    SourceSpec,
    effective_desired_sv,
    generate_snapshots,
    steering_matrix,
    steering_vector,
)
from beamsim.arrays import batch_trace

from conftest import reference_batch


class TestSteeringVector:
    def test_broadside_is_all_ones(self):
        a = steering_vector(ArrayGeometry(4), 0.0)
        np.testing.assert_array_equal(a, np.ones(4, dtype=complex))

    def test_endfire_alternates_sign(self):
        a = steering_vector(ArrayGeometry(3), 90.0)
        np.testing.assert_allclose(a, [1.0, -1.0, 1.0], atol=1e-12)

    def test_thirty_degrees_quarter_turn(self):
        a = steering_vector(ArrayGeometry(2), 30.0)
        np.testing.assert_allclose(a, [1.0, -1j], atol=1e-12)

    def test_first_element_exactly_one(self):
        for theta in (-87.3, -12.0, 0.0, 41.7, 90.0):
            assert steering_vector(ArrayGeometry(8), theta)[0] == 1.0 + 0.0j

    @pytest.mark.parametrize("theta", [-90.0, -45.5, -3.0, 0.0, 17.2, 63.0, 90.0])
    def test_unit_modulus_and_norm(self, theta):
        m = 10
        a = steering_vector(ArrayGeometry(m), theta)
        np.testing.assert_allclose(np.abs(a), 1.0, atol=1e-14)
        assert abs(np.vdot(a, a).real - m) < 1e-12

    @pytest.mark.parametrize("theta", [3.0, 28.5, 74.0])
    def test_conjugate_symmetry_in_angle(self, theta):
        geom = ArrayGeometry(7, 1.0)
        np.testing.assert_allclose(
            steering_vector(geom, -theta), steering_vector(geom, theta).conj(), atol=1e-14)

    @pytest.mark.parametrize("theta", [-90.1, 90.1, 180.0])
    def test_out_of_range_rejected(self, theta):
        with pytest.raises(ValueError):
            steering_vector(ArrayGeometry(4), theta)
        with pytest.raises(ValueError):
            steering_matrix(ArrayGeometry(4), [0.0, theta])

    def test_matrix_rows_match_single_vectors(self):
        geom = ArrayGeometry(6, 1.0)
        thetas = [-40.0, 0.0, 12.5]
        grid = steering_matrix(geom, thetas)
        for row, theta in zip(grid, thetas):
            np.testing.assert_allclose(row, steering_vector(geom, theta), atol=1e-14)


class TestDomainTypes:
    def test_geometry_validation(self):
        with pytest.raises(ValueError):
            ArrayGeometry(1)
        with pytest.raises(ValueError):
            ArrayGeometry(4, 0.0)
        with pytest.raises(ValueError):
            ArrayGeometry(4, -1.0)

    def test_source_spec(self):
        src = SourceSpec(5.0, 20.0)
        assert src.power == pytest.approx(100.0)
        with pytest.raises(ValueError):
            SourceSpec(95.0, 0.0)

    def test_mismatch_validation(self):
        with pytest.raises(ValueError):
            AccumulatedPhaseMismatch(-0.1)
        with pytest.raises(ValueError):
            IncoherentScatteringMismatch(num_paths=-1)
        with pytest.raises(ValueError):
            IncoherentScatteringMismatch(distribution="triangular")

    def test_snapshot_batch_validation(self):
        with pytest.raises(ValueError):
            SnapshotBatch(np.zeros((4, 0)))
        with pytest.raises(ValueError):
            SnapshotBatch(np.zeros(4))
        batch = SnapshotBatch(np.ones((4, 3)))
        assert batch.num_sensors == 4 and batch.num_snapshots == 3


class TestEffectiveDesiredSv:
    def test_no_mismatch_is_identity(self, geom10):
        rng = np.random.default_rng(0)
        out = effective_desired_sv(geom10, 5.0, NoMismatch(), rng)
        assert isinstance(out, FixedSteeringVector)
        np.testing.assert_array_equal(out.vector, steering_vector(geom10, 5.0))

    def test_zero_std_phase_is_identity(self, geom10):
        rng = np.random.default_rng(0)
        out = effective_desired_sv(geom10, 5.0, AccumulatedPhaseMismatch(0.0), rng)
        np.testing.assert_allclose(out.vector, steering_vector(geom10, 5.0), atol=1e-15)

    def test_phase_mismatch_unit_modulus_first_entry_one(self, geom10):
        rng = np.random.default_rng(1)
        for _ in range(100):
            out = effective_desired_sv(geom10, 5.0, AccumulatedPhaseMismatch(), rng)
            assert out.vector[0] == 1.0 + 0.0j
            np.testing.assert_allclose(np.abs(out.vector), 1.0, atol=1e-14)

    def test_phase_mismatch_is_gaussian_random_walk(self, geom10):
        # 1e4 draws: per-step phase increments should have mean 0 and std 0.07.
        rng = np.random.default_rng(2)
        n_draws, std = 10_000, 0.07
        nominal = steering_vector(geom10, 5.0)
        offsets = np.empty((n_draws, geom10.num_sensors))
        for i in range(n_draws):
            out = effective_desired_sv(geom10, 5.0, AccumulatedPhaseMismatch(std), rng)
            offsets[i] = np.angle(out.vector * nominal.conj())
        increments = np.diff(offsets, axis=1)  # (n_draws, M-1)
        # 4-sigma bands for the mean and std estimators
        assert abs(increments.mean()) < 4 * std / np.sqrt(increments.size)
        assert abs(increments.std() - std) < 4 * std / np.sqrt(2 * increments.size)
        # random-walk signature: per-element phase variance grows linearly
        variances = offsets.var(axis=0)
        expected = np.arange(geom10.num_sensors) * std**2
        np.testing.assert_allclose(variances[1:], expected[1:], rtol=0.15)

    def test_scatter_set_shape_and_bounds(self, geom10):
        rng = np.random.default_rng(3)
        mm = IncoherentScatteringMismatch()
        out = effective_desired_sv(geom10, 5.0, mm, rng)
        assert isinstance(out, ScatterSet)
        assert out.doas_deg.shape == (5,)
        assert out.steering.shape == (5, 10)
        half = np.sqrt(3.0) * mm.doa_std_deg
        assert np.all(out.doas_deg >= mm.doa_mean_deg - half)
        assert np.all(out.doas_deg <= mm.doa_mean_deg + half)

    def test_scatter_doa_moments(self, geom10):
        rng = np.random.default_rng(4)
        mm = IncoherentScatteringMismatch()
        doas = np.concatenate([
            effective_desired_sv(geom10, 5.0, mm, rng).doas_deg for _ in range(10_000)])
        assert abs(doas.mean() - 5.0) < 4 * 2.0 / np.sqrt(doas.size)
        assert abs(doas.std() - 2.0) < 0.05

    def test_scatter_gaussian_variant(self, geom10):
        rng = np.random.default_rng(5)
        mm = IncoherentScatteringMismatch(distribution="gaussian")
        doas = np.concatenate([
            effective_desired_sv(geom10, 5.0, mm, rng).doas_deg for _ in range(5000)])
        assert abs(doas.std() - 2.0) < 0.1


class TestGenerateSnapshots:
    def test_rejects_empty_batch(self, geom10):
        with pytest.raises(ValueError):
            generate_snapshots(geom10, SourceSpec(5, 0), [], NoMismatch(), 0,
                               np.random.default_rng(0))

    def test_seed_reproducibility(self, geom10):
        args = (geom10, SourceSpec(5, 20), [SourceSpec(20, 30)], NoMismatch(), 50)
        batch1, truth1 = generate_snapshots(*args, np.random.default_rng(42))
        batch2, truth2 = generate_snapshots(*args, np.random.default_rng(42))
        np.testing.assert_array_equal(batch1.data, batch2.data)
        np.testing.assert_array_equal(truth1.desired.vector, truth2.desired.vector)

    def test_noise_only_unit_variance(self, geom10):
        # vanishing desired power leaves pure unit noise; trace/M -> 1
        rng = np.random.default_rng(6)
        batch, _ = generate_snapshots(
            geom10, SourceSpec(5.0, -400.0), [], NoMismatch(), 100_000, rng)
        assert batch_trace(batch) / geom10.num_sensors == pytest.approx(1.0, rel=0.02)

    def test_single_source_covariance(self, geom10):
        rng = np.random.default_rng(7)
        batch, truth = generate_snapshots(
            geom10, SourceSpec(5.0, 0.0), [], NoMismatch(), 100_000, rng)
        a0 = truth.desired.vector
        expected = np.outer(a0, a0.conj()) + np.eye(10)
        scm = batch.data @ batch.data.conj().T / batch.num_snapshots
        err = np.linalg.norm(scm - expected) / np.linalg.norm(expected)
        assert err < 0.05

    def test_noise_covariance_error_decays_like_sqrt_k(self, geom10):
        def frob_err(k, seed):
            rng = np.random.default_rng(seed)
            batch, _ = generate_snapshots(
                geom10, SourceSpec(5.0, -400.0), [], NoMismatch(), k, rng)
            scm = batch.data @ batch.data.conj().T / k
            return np.linalg.norm(scm - np.eye(10))

        err_small = np.mean([frob_err(1000, s) for s in range(3)])
        err_large = np.mean([frob_err(100_000, s + 10) for s in range(3)])
        assert 3.0 < err_small / err_large < 30.0

    def test_scatter_power_split_preserves_total(self, geom10):
        # equal split across 5 paths: desired contributes sigma0^2 per sensor
        rng = np.random.default_rng(8)
        batch, truth = generate_snapshots(
            geom10, SourceSpec(5.0, 0.0), [], IncoherentScatteringMismatch(), 100_000, rng)
        assert isinstance(truth.desired, ScatterSet)
        assert batch_trace(batch) / geom10.num_sensors == pytest.approx(2.0, rel=0.03)

    def test_truth_carries_interferers(self, geom10):
        rng = np.random.default_rng(9)
        _, truth = reference_batch(geom10, rng)
        assert truth.interferer_svs.shape == (2, 10)
        np.testing.assert_allclose(truth.interferer_powers, [1000.0, 1000.0])
        assert truth.desired_power == pytest.approx(100.0)
