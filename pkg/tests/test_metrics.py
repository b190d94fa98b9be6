"""Amplitude/phase/k error metrics, overlap geometry, and the eval report."""

import json

import numpy as np
import pytest

import rotoptych as rp
from rotoptych.solver import result_from_spectrum


def complex_raster(n, seed):
    rng = np.random.default_rng(seed)
    mag = rng.uniform(0.5, 1.5, (n, n))
    ph = rng.uniform(-np.pi / 2, np.pi / 2, (n, n))
    return rp.ComplexField(mag * np.exp(1j * ph), "spatial")


class TestAmplitudeRmse:
    def test_identical_fields_score_zero(self):
        f = complex_raster(16, 0)
        assert rp.amplitude_rmse(f, f) == 0.0

    def test_constant_offset(self):
        f = complex_raster(16, 1)
        bumped = rp.ComplexField((np.abs(f.data) + 0.1) * np.exp(1j * np.angle(f.data)), "spatial")
        assert rp.amplitude_rmse(bumped, f) == pytest.approx(0.1, rel=1e-12)

    def test_global_phase_invariance(self):
        f = complex_raster(16, 2)
        spun = rp.ComplexField(f.data * np.exp(2.1j), "spatial")
        assert rp.amplitude_rmse(spun, f) < 1e-15
        assert rp.amplitude_rmse(f, spun) < 1e-15

    def test_shape_mismatch_rejected(self):
        with pytest.raises(rp.ValidationError):
            rp.amplitude_rmse(complex_raster(16, 0), complex_raster(32, 0))


class TestPhaseRmse:
    def test_identical_fields_score_zero(self):
        f = complex_raster(16, 3)
        assert rp.phase_rmse_offset_corrected(f, f) == 0.0

    def test_global_phase_removed_exactly(self):
        f = complex_raster(32, 4)
        rng = np.random.default_rng(5)
        for phi in rng.uniform(-np.pi, np.pi, 20):
            spun = rp.ComplexField(f.data * np.exp(1j * phi), "spatial")
            assert rp.phase_rmse_offset_corrected(spun, f) <= 1e-12

    def test_symmetric_bimodal_error(self):
        n = 16
        truth = rp.ComplexField(np.ones((n, n), dtype=np.complex128), "spatial")
        err = np.full((n, n), 0.2)
        err[: n // 2] = -0.2
        recovered = rp.ComplexField(np.exp(1j * err), "spatial")
        assert rp.phase_rmse_offset_corrected(recovered, truth) == pytest.approx(0.2, rel=1e-12)

    def test_wrap_prevents_2pi_jump_domination(self):
        # phases straddling the branch cut differ by ~2pi numerically but are
        # physically close; wrapping keeps the score small
        n = 16
        truth = rp.ComplexField(np.exp(1j * np.full((n, n), np.pi - 0.01)), "spatial")
        recovered = rp.ComplexField(np.exp(1j * np.full((n, n), -np.pi + 0.01)), "spatial")
        assert rp.phase_rmse_offset_corrected(recovered, truth) < 1e-10

    def test_masked_variant_ignores_dark_pixels(self):
        n = 16
        amp = np.ones((n, n))
        amp[0] = 0.0
        truth = rp.ComplexField(amp * np.exp(0.3j), "spatial")
        bad_phase = np.full((n, n), 0.3)
        bad_phase[0] = -2.0
        recovered = rp.ComplexField(amp.clip(0.01, None) * np.exp(1j * bad_phase), "spatial")
        unmasked = rp.phase_rmse_offset_corrected(recovered, truth)
        masked = rp.phase_rmse_offset_corrected(recovered, truth, mask_threshold=0.05)
        assert masked <= 1e-12
        assert unmasked > 0.1

    def test_all_masked_returns_zero(self):
        f = complex_raster(8, 6)
        dark = rp.ComplexField(np.zeros((8, 8), dtype=np.complex128), "spatial")
        assert rp.phase_rmse_offset_corrected(f, dark, mask_threshold=0.05) == 0.0

    def test_bounded_by_pi(self):
        rng = np.random.default_rng(7)
        for seed in range(5):
            a = complex_raster(8, seed)
            b = rp.ComplexField(np.exp(1j * rng.uniform(-np.pi, np.pi, (8, 8))), "spatial")
            assert rp.phase_rmse_offset_corrected(a, b) <= np.pi


class TestKRmse:
    def test_identical_lists(self):
        shifts = np.array([[1, 2], [-3, 4], [0, 0]], dtype=np.int64)
        assert rp.k_rmse(shifts, shifts) == 0.0

    def test_three_four_five(self):
        truth = np.zeros((10, 2), dtype=np.int64)
        est = truth + np.array([3, 4])
        assert rp.k_rmse(est, truth) == pytest.approx(5.0, rel=1e-12)

    def test_matches_brute_force_on_random_perturbations(self):
        rng = np.random.default_rng(8)
        truth = rng.integers(-10, 11, (40, 2))
        est = truth + rng.integers(-1, 2, (40, 2))
        want = np.sqrt(np.mean([(e[0] - t[0]) ** 2 + (e[1] - t[1]) ** 2 for e, t in zip(est, truth)]))
        assert rp.k_rmse(est, truth) == pytest.approx(want, rel=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(9)
        a = rng.integers(-5, 6, (12, 2))
        b = rng.integers(-5, 6, (12, 2))
        assert rp.k_rmse(a, b) == rp.k_rmse(b, a)

    def test_accepts_estimate_objects(self):
        shifts = np.array([[1, 1], [2, 2]], dtype=np.int64)
        est = rp.KSpaceEstimate(shifts, "external")
        assert rp.k_rmse(est, shifts) == 0.0

    def test_length_mismatch_rejected(self):
        with pytest.raises(rp.ValidationError):
            rp.k_rmse(np.zeros((3, 2)), np.zeros((4, 2)))

    def test_per_record_errors(self):
        truth = np.zeros((3, 2), dtype=np.int64)
        est = np.array([[0, 0], [3, 4], [-6, 8]])
        np.testing.assert_allclose(rp.per_record_k_error(est, truth), [0.0, 5.0, 10.0])


class TestOverlapFraction:
    def test_coincident_disks(self):
        assert rp.overlap_fraction(0.0, 7.0) == 1.0

    def test_disjoint_disks(self):
        assert rp.overlap_fraction(14.0, 7.0) == 0.0
        assert rp.overlap_fraction(20.0, 7.0) == 0.0

    def test_monotone_decreasing_in_distance(self):
        r = 16.0
        values = [rp.overlap_fraction(d, r) for d in np.linspace(0, 2 * r, 33)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_continuous_at_touching_point(self):
        r = 10.0
        assert rp.overlap_fraction(2 * r - 1e-9, r) < 1e-6
        assert rp.overlap_fraction(2 * r, r) == 0.0

    def test_agrees_with_pixel_count(self):
        # discrete disk intersection on a fine grid tracks the analytic lens area
        for d in (6, 12, 20):
            analytic = rp.overlap_fraction(float(d), 16.0)
            pixel = rp.overlap_fraction_pixels(d, 16.0, 256)
            assert pixel == pytest.approx(analytic, abs=0.02)

    def test_default_scene_self_consistency(self):
        cfg = rp.OpticalConfig(532e-9, 256, 100.0 / 256, 16.0)
        kmax = rp.rotation_to_pixel_shift(rp.RotationAngle(np.deg2rad(9e-6), 0.0), cfg).kx
        assert rp.overlap_fraction(2 * kmax / 10, 16.0) == pytest.approx(0.54, abs=0.01)

    def test_invalid_radius_rejected(self):
        with pytest.raises(rp.ValidationError):
            rp.overlap_fraction(1.0, 0.0)
        with pytest.raises(rp.ValidationError):
            rp.overlap_fraction(-1.0, 5.0)


class TestEvaluate:
    def perfect_result(self, ms):
        spectrum = rp.fft_centered(ms.target)
        truth = np.array([r.true_k.as_ints() for r in ms.records], dtype=np.int64)
        return result_from_spectrum(
            spectrum,
            initial_k=rp.KSpaceEstimate(truth.copy(), "ground_truth"),
            corrected_k=rp.KSpaceEstimate(truth, "corrected"),
            loss_trace={"data": [0.0], "tv": [0.0], "phase": [0.0]},
            params=rp.SolverParams(iterations=1),
        )

    def test_perfect_reconstruction_scores_zero(self, bandlimited_scene):
        report = rp.evaluate(self.perfect_result(bandlimited_scene), bandlimited_scene)
        assert report.amplitude_rmse <= 1e-12
        assert report.phase_rmse <= 1e-10
        assert report.phase_rmse_masked <= 1e-10
        assert report.k_rmse == 0.0
        assert np.all(np.asarray(report.per_record_k_error) == 0.0)
        assert 0.0 < report.overlap_fraction < 1.0

    def test_requires_ground_truth(self, bandlimited_scene):
        result = self.perfect_result(bandlimited_scene)
        blind = rp.MeasurementSet(
            config=bandlimited_scene.config,
            records=[
                rp.MeasurementRecord(r.index, r.angle, None, r.image, r.pupil)
                for r in bandlimited_scene.records
            ],
            noise=bandlimited_scene.noise,
            grid_layout=bandlimited_scene.grid_layout,
            target=None,
        )
        with pytest.raises(rp.ValidationError, match="ground truth"):
            rp.evaluate(result, blind)

    def test_report_serialization(self, tmp_path, bandlimited_scene):
        report = rp.evaluate(self.perfect_result(bandlimited_scene), bandlimited_scene)
        d = report.to_dict()
        assert set(d) >= {
            "amplitude_rmse",
            "phase_rmse",
            "phase_rmse_masked",
            "k_rmse",
            "per_record_k_error",
            "overlap_fraction",
        }
        path = tmp_path / "report.json"
        report.save(path)
        loaded = json.loads(path.read_text())
        assert loaded["k_rmse"] == 0.0
        assert len(loaded["per_record_k_error"]) == len(bandlimited_scene.records)
