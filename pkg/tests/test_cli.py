"""End-to-end command-line workflow: simulate, reconstruct, evaluate, plot."""

import json

import numpy as np
import pytest
from PIL import Image

import rotoptych as rp
from rotoptych.cli import main

from conftest import smooth_texture


@pytest.fixture(scope="module")
def target_png(tmp_path_factory):
    path = tmp_path_factory.mktemp("assets") / "target.png"
    img = (smooth_texture(64, seed=20) * 255).astype(np.uint8)
    Image.fromarray(img, mode="L").save(path)
    return path


def simulate_args(target, out, extra=()):
    return [
        "simulate",
        "--target", str(target),
        "--grid", "3x3",
        "--kmax", "10",
        "--n", "64",
        "--radius", "8",
        "--out", str(out),
        *extra,
    ]


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory, target_png):
    out = tmp_path_factory.mktemp("work") / "ds"
    assert main(simulate_args(target_png, out)) == 0
    return out


@pytest.fixture(scope="module")
def result_dir(dataset_dir):
    out = dataset_dir.parent / "res"
    code = main(
        [
            "reconstruct", str(dataset_dir),
            "--init", "ground-truth",
            "--iters", "5",
            "--dmax", "0",
            "--dmin", "0",
            "--out", str(out),
        ]
    )
    assert code == 0
    return out


class TestSimulate:
    def test_writes_dataset_and_reports_counts(self, capsys, tmp_path, target_png):
        out = tmp_path / "ds"
        assert main(simulate_args(target_png, out)) == 0
        printed = capsys.readouterr().out
        assert "records: 9" in printed
        assert "overlap fraction:" in printed
        ms = rp.load_dataset(out)
        assert len(ms.records) == 9
        assert ms.target is not None

    def test_single_point_grid(self, capsys, tmp_path, target_png):
        out = tmp_path / "one"
        args = simulate_args(target_png, out)
        args[args.index("--grid") + 1] = "1x1"
        assert main(args) == 0
        assert "records: 1" in capsys.readouterr().out
        ms = rp.load_dataset(out)
        assert ms.records[0].true_k.as_ints() == (0, 0)

    def test_seed_gives_bit_identical_datasets(self, tmp_path, target_png):
        a, b = tmp_path / "a", tmp_path / "b"
        noise = ["--noise", "gaussian:0.03", "--seed", "9"]
        assert main(simulate_args(target_png, a, noise)) == 0
        assert main(simulate_args(target_png, b, noise)) == 0
        for name in ("image_000.f32", "pupil_004.f32"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_invalid_radius_is_validation_error(self, capsys, tmp_path, target_png):
        args = simulate_args(target_png, tmp_path / "bad")
        args[args.index("--radius") + 1] = "200"
        assert main(args) == 1
        assert "error:" in capsys.readouterr().err

    def test_theta_flags_are_exclusive(self, capsys, tmp_path, target_png):
        args = simulate_args(target_png, tmp_path / "dup") + ["--theta-max", "1e-3"]
        assert main(args) == 1
        assert "exactly one of" in capsys.readouterr().err

    def test_missing_target_is_io_error(self, tmp_path):
        assert main(simulate_args(tmp_path / "ghost.png", tmp_path / "out")) == 2

    def test_existing_output_refused(self, capsys, tmp_path, target_png):
        out = tmp_path / "taken"
        out.mkdir()
        assert main(simulate_args(target_png, out)) == 1
        assert "already exists" in capsys.readouterr().err

    def test_failed_run_leaves_no_output(self, tmp_path, target_png):
        out = tmp_path / "never"
        args = simulate_args(target_png, out)
        args[args.index("--kmax") + 1] = "40"  # off-grid for n=64, r=8
        assert main(args) == 1
        assert not out.exists()
        assert list(tmp_path.iterdir()) == []


class TestReconstruct:
    def test_reports_losses_and_corrections(self, capsys, dataset_dir, tmp_path):
        out = tmp_path / "r"
        code = main(
            ["reconstruct", str(dataset_dir), "--iters", "2", "--dmax", "0", "--dmin", "0",
             "--out", str(out)]
        )
        assert code == 0
        printed = capsys.readouterr().out
        assert "final losses:" in printed
        assert "k corrections:" in printed
        meta = json.loads((out / "result.json").read_text())
        assert meta["initial_k"]["provenance"] == "ground_truth"
        assert meta["corrected_k"]["provenance"] == "corrected"
        assert len(meta["loss_trace"]["data"]) == 2

    def test_file_init_records_external_provenance(self, dataset_dir, tmp_path):
        ms = rp.load_dataset(dataset_dir)
        preds = tmp_path / "preds.json"
        rp.save_predictions(np.array([r.true_k.as_ints() for r in ms.records]), preds)
        out = tmp_path / "r"
        code = main(
            ["reconstruct", str(dataset_dir), "--init", f"file:{preds}",
             "--iters", "2", "--dmax", "0", "--dmin", "0", "--out", str(out)]
        )
        assert code == 0
        meta = json.loads((out / "result.json").read_text())
        assert meta["initial_k"]["provenance"] == "external"

    def test_pupil_support_init_accepted(self, dataset_dir, tmp_path):
        out = tmp_path / "r"
        code = main(
            ["reconstruct", str(dataset_dir), "--init", "pupil-support",
             "--iters", "2", "--dmax", "0", "--dmin", "0", "--out", str(out)]
        )
        assert code == 0

    def test_zero_iterations_is_validation_error(self, capsys, dataset_dir, tmp_path):
        code = main(
            ["reconstruct", str(dataset_dir), "--iters", "0", "--out", str(tmp_path / "r")]
        )
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_missing_dataset_is_io_error(self, tmp_path):
        assert main(["reconstruct", str(tmp_path / "void"), "--out", str(tmp_path / "r")]) == 2

    def test_missing_prediction_file_is_io_error(self, dataset_dir, tmp_path):
        code = main(
            ["reconstruct", str(dataset_dir), "--init", f"file:{tmp_path / 'no.json'}",
             "--iters", "1", "--out", str(tmp_path / "r")]
        )
        assert code == 2


class TestEvaluate:
    def test_writes_report_and_table(self, capsys, dataset_dir, result_dir, tmp_path):
        report = tmp_path / "report.json"
        assert main(["evaluate", str(result_dir), str(dataset_dir), "--out", str(report)]) == 0
        printed = capsys.readouterr().out
        for key in ("amplitude_rmse", "phase_rmse", "phase_rmse_masked", "k_rmse", "overlap_fraction"):
            assert key in printed
        loaded = json.loads(report.read_text())
        assert loaded["k_rmse"] == 0.0
        assert loaded["amplitude_rmse"] < 0.1

    def test_perfect_result_scores_zero(self, capsys, dataset_dir, tmp_path):
        from rotoptych.solver import result_from_spectrum

        ms = rp.load_dataset(dataset_dir)
        truth = np.array([r.true_k.as_ints() for r in ms.records], dtype=np.int64)
        perfect = result_from_spectrum(
            rp.fft_centered(ms.target),
            initial_k=rp.KSpaceEstimate(truth.copy(), "ground_truth"),
            corrected_k=rp.KSpaceEstimate(truth, "corrected"),
            loss_trace={"data": [0.0], "tv": [0.0], "phase": [0.0]},
            params=rp.SolverParams(iterations=1),
        )
        res_dir = tmp_path / "perfect"
        rp.save_result(perfect, res_dir)
        report = tmp_path / "report.json"
        assert main(["evaluate", str(res_dir), str(dataset_dir), "--out", str(report)]) == 0
        loaded = json.loads(report.read_text())
        assert loaded["amplitude_rmse"] < 1e-7
        assert loaded["phase_rmse"] < 1e-5
        assert loaded["k_rmse"] == 0.0

    def test_missing_result_is_io_error(self, dataset_dir, tmp_path):
        assert main(["evaluate", str(tmp_path / "none"), str(dataset_dir)]) == 2

    def test_corrupt_manifest_is_io_error(self, result_dir, tmp_path):
        broken = tmp_path / "broken"
        broken.mkdir()
        (broken / "manifest.json").write_text("{not json")
        assert main(["evaluate", str(result_dir), str(broken)]) == 2


class TestPlot:
    def test_emits_three_panels(self, dataset_dir, result_dir, tmp_path):
        out = tmp_path / "plots"
        code = main(
            ["plot", str(result_dir), "--dataset", str(dataset_dir), "--out", str(out)]
        )
        assert code == 0
        for name in ("amplitude.png", "phase.png", "kspace.png"):
            path = out / name
            assert path.is_file()
            with Image.open(path) as img:
                assert min(img.size) >= 64

    def test_amplitude_panel_normalization(self, result_dir, tmp_path):
        out = tmp_path / "plots"
        assert main(["plot", str(result_dir), "--out", str(out)]) == 0
        with Image.open(out / "amplitude.png") as img:
            arr = np.asarray(img.convert("L"), dtype=np.float64)
        result = rp.load_result(result_dir)
        amp = np.abs(result.object_field.data)
        # the true |o| peak must land on a saturated pixel
        ay, ax = np.unravel_index(np.argmax(amp), amp.shape)
        assert arr.max() == 255
        assert arr[ay, ax] == 255

    def test_no_truth_flag(self, dataset_dir, result_dir, tmp_path):
        out = tmp_path / "plots"
        code = main(
            ["plot", str(result_dir), "--dataset", str(dataset_dir), "--no-truth",
             "--out", str(out)]
        )
        assert code == 0
        assert (out / "kspace.png").is_file()

    def test_missing_result_is_io_error(self, tmp_path):
        assert main(["plot", str(tmp_path / "void"), "--out", str(tmp_path / "p")]) == 2
