"""Command-line interface: simulate, reconstruct, evaluate, plot.

Each command validates its inputs before writing anything and stages output
into a temporary sibling directory that is renamed into place on success, so
a failed run never leaves a partial dataset or result behind.

Exit codes: 0 success, 1 validation error, 2 I/O error.
"""
from __future__ import annotations

import argparse
import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from .dataset import load_dataset, load_result, save_dataset, save_result
from .initializers import initializer_by_name
from .metrics import evaluate, overlap_fraction, phase_rmse_offset_corrected
from .optics import (
    OpticalConfig,
    RotationAngle,
    ValidationError,
    WaveVector,
    pixel_shift_to_rotation,
    rotation_to_pixel_shift,
)
from .sim import NoiseSpec, build_complex_target, generate_rotation_grid, synthesize_dataset
from .solver import SolverParams, reconstruct

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


def _load_gray_image(path: Path) -> np.ndarray:
    """Read an 8-bit grayscale image or a raw square float32 raster."""
    if path.suffix == ".f32":
        flat = np.fromfile(path, dtype="<f4")
        side = math.isqrt(flat.size)
        if side * side != flat.size:
            raise ValidationError(f"{path}: raw f32 raster is not square ({flat.size} values)")
        return flat.reshape(side, side).astype(np.float64)
    from PIL import Image

    with Image.open(path) as img:
        return np.asarray(img.convert("L"), dtype=np.float64)


def _parse_grid(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise ValidationError(f"grid must look like 11x11, got {text!r}")
    try:
        nx, ny = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise ValidationError(f"grid must look like 11x11, got {text!r}") from exc
    return nx, ny


def _parse_noise(text: str) -> NoiseSpec:
    if text == "none":
        return NoiseSpec()
    kind, sep, value = text.partition(":")
    if not sep:
        raise ValidationError(f"noise must be none, gaussian:<sigma>, or poisson:<peak>, got {text!r}")
    try:
        level = float(value)
    except ValueError as exc:
        raise ValidationError(f"bad noise level in {text!r}") from exc
    if kind == "gaussian":
        return NoiseSpec(kind="gaussian", sigma=level)
    if kind == "poisson":
        return NoiseSpec(kind="poisson", peak=level)
    raise ValidationError(f"unknown noise kind {kind!r}")


def _resolve_theta(args: argparse.Namespace, config: OpticalConfig) -> float:
    given = [
        name
        for name, value in (
            ("theta-max", args.theta_max),
            ("theta-max-deg", args.theta_max_deg),
            ("kmax", args.kmax),
        )
        if value is not None
    ]
    if len(given) != 1:
        raise ValidationError("give exactly one of --theta-max, --theta-max-deg, --kmax")
    if args.theta_max is not None:
        return args.theta_max
    if args.theta_max_deg is not None:
        return math.radians(args.theta_max_deg)
    angle = pixel_shift_to_rotation(WaveVector(args.kmax, 0.0), config)
    return angle.theta_x


def _grid_spacing_px(theta_max: float, points: int, config: OpticalConfig) -> float:
    """Real-valued spectral step between adjacent tilt positions, in pixels."""
    if points <= 1 or theta_max == 0.0:
        return 0.0
    theta_step = 2.0 * theta_max / (points - 1)
    return abs(rotation_to_pixel_shift(RotationAngle(theta_step, 0.0), config).kx)


class _StagedDir:
    """Write into a temp sibling of the destination; rename on success."""

    def __init__(self, destination: Path):
        self.destination = destination
        self.tmp: Path | None = None

    def __enter__(self) -> Path:
        if self.destination.exists():
            raise ValidationError(f"output path already exists: {self.destination}")
        self.destination.parent.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(
            tempfile.mkdtemp(prefix=f".{self.destination.name}.", dir=self.destination.parent)
        )
        return self.tmp

    def __exit__(self, exc_type, exc, tb) -> None:
        if self.tmp is None:
            return
        if exc_type is None:
            self.tmp.rename(self.destination)
        else:
            shutil.rmtree(self.tmp, ignore_errors=True)


def cmd_simulate(args: argparse.Namespace) -> int:
    pitch = args.pitch if args.pitch is not None else args.width / args.n
    config = OpticalConfig(
        wavelength=args.wavelength,
        grid_size=args.n,
        pixel_pitch=pitch,
        aperture_radius=args.radius,
    )
    amplitude = _load_gray_image(Path(args.target))
    phase = _load_gray_image(Path(args.phase_target)) if args.phase_target else None
    target = build_complex_target(amplitude, phase, args.n, phase_max=args.phase_max)
    nx, ny = _parse_grid(args.grid)
    theta_max = _resolve_theta(args, config)
    grid = generate_rotation_grid(nx, ny, theta_max)
    noise = _parse_noise(args.noise)
    ms = synthesize_dataset(target, grid, config, noise, seed=args.seed)

    out = Path(args.out)
    with _StagedDir(out) as tmp:
        save_dataset(ms, tmp)

    max_k = max(math.hypot(*rec.true_k.as_ints()) for rec in ms.records)
    print(f"records: {len(ms.records)}")
    print(f"max |true_k|: {max_k:.1f} px")
    spacing = _grid_spacing_px(theta_max, max(nx, ny), config)
    if spacing > 0:
        print(f"overlap fraction: {overlap_fraction(spacing, args.radius):.4f}")
    print(f"dataset: {out}")
    return EXIT_OK


def cmd_reconstruct(args: argparse.Namespace) -> int:
    ms = load_dataset(args.dataset)
    init = initializer_by_name(args.init, ms, stride=args.coarse_stride)
    params = SolverParams(
        iterations=args.iters,
        beta=args.beta,
        gamma=args.gamma,
        delta_max=args.dmax,
        delta_min=args.dmin,
        search_every=args.search_every,
        epsilon=args.epsilon,
        use_pupil_constraint=args.pupil_constraint,
    )
    result = reconstruct(ms, init, params)

    out = Path(args.out) if args.out else Path(args.dataset) / "result"
    with _StagedDir(out) as tmp:
        save_result(result, tmp)

    trace = result.loss_trace
    print(
        "final losses: data {:.6g}, tv {:.6g}, phase {:.6g}".format(
            trace["data"][-1], trace["tv"][-1], trace["phase"][-1]
        )
    )
    moved = int(
        (np.asarray(result.corrected_k.shifts) != np.asarray(result.initial_k.shifts))
        .any(axis=1)
        .sum()
    )
    print(f"k corrections: {moved} of {len(result.corrected_k.shifts)} records")
    print(f"result: {out}")
    return EXIT_OK


_REPORT_ORDER = (
    "amplitude_rmse",
    "phase_rmse",
    "phase_rmse_masked",
    "k_rmse",
    "overlap_fraction",
)


def cmd_evaluate(args: argparse.Namespace) -> int:
    result = load_result(args.result)
    ms = load_dataset(args.dataset)
    report = evaluate(result, ms)
    payload = report.to_dict()

    out = Path(args.out) if args.out else Path(args.result) / "report.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = out.with_name(out.name + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2) + "\n")
    tmp.replace(out)

    for key in _REPORT_ORDER:
        print(f"{key:20s} {payload[key]:.6f}")
    print(f"report: {out}")
    return EXIT_OK


def _save_gray_png(raster: np.ndarray, path: Path) -> None:
    """Max-normalized 8-bit grayscale; an all-zero raster stays black."""
    from PIL import Image

    peak = float(raster.max())
    scaled = raster / peak if peak > 0 else raster
    Image.fromarray((np.clip(scaled, 0.0, 1.0) * 255).round().astype(np.uint8), "L").save(path)


def _save_phase_png(phase: np.ndarray, path: Path) -> None:
    """Hue-map phase over (-pi, pi] with the hsv colormap."""
    from matplotlib import colormaps

    hue = (phase + math.pi) / (2 * math.pi)
    rgba = colormaps["hsv"](np.clip(hue, 0.0, 1.0))
    from PIL import Image

    Image.fromarray((rgba[..., :3] * 255).round().astype(np.uint8), "RGB").save(path)


def cmd_plot(args: argparse.Namespace) -> int:
    result = load_result(args.result)
    ms = None
    if args.dataset:
        ms = load_dataset(args.dataset)

    out_dir = Path(args.out) if args.out else Path(args.result)
    out_dir.mkdir(parents=True, exist_ok=True)

    field = result.object_field.data
    _save_gray_png(np.abs(field), out_dir / "amplitude.png")

    phase = np.angle(field)
    if ms is not None and ms.target is not None:
        diff = phase - np.angle(ms.target.data)
        wrapped = np.arctan2(np.sin(diff), np.cos(diff))
        offset = float(wrapped.mean())
        phase = np.angle(field * np.exp(-1j * offset))
    _save_phase_png(phase, out_dir / "phase.png")

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 6))
    initial = np.asarray(result.initial_k.shifts)
    corrected = np.asarray(result.corrected_k.shifts)
    if ms is not None and ms.target is not None and not args.no_truth:
        truth = np.array([rec.true_k.as_ints() for rec in ms.records])
        ax.scatter(truth[:, 0], truth[:, 1], marker="+", s=60, c="k", label="truth")
    ax.scatter(initial[:, 0], initial[:, 1], marker="x", s=25, c="tab:red", label="initial")
    ax.scatter(
        corrected[:, 0], corrected[:, 1], marker="o", s=25, facecolors="none",
        edgecolors="tab:blue", label="corrected",
    )
    ax.set_xlabel("kx (px)")
    ax.set_ylabel("ky (px)")
    ax.set_aspect("equal")
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(out_dir / "kspace.png", dpi=120)
    plt.close(fig)

    print(f"plots: {out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rotoptych",
        description="Simulate and reconstruct rotation-scanned dual-plane ptychography data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="render a synthetic dual-plane dataset")
    sim.add_argument("--target", required=True, help="amplitude source (PNG or raw .f32)")
    sim.add_argument("--phase-target", help="optional phase source image")
    sim.add_argument("--phase-max", type=float, default=math.pi / 4,
                     help="phase range upper bound in radians (default pi/4)")
    sim.add_argument("--grid", default="11x11", help="tilt grid, e.g. 11x11")
    sim.add_argument("--theta-max", type=float, help="max tilt angle in radians")
    sim.add_argument("--theta-max-deg", type=float, help="max tilt angle in degrees")
    sim.add_argument("--kmax", type=float, help="max spectral shift in pixels")
    sim.add_argument("--n", type=int, default=256, help="grid size (default 256)")
    sim.add_argument("--radius", type=float, default=16.0, help="pupil radius in pixels")
    sim.add_argument("--width", type=float, default=100.0,
                     help="target width in meters, sets pixel pitch (default 100)")
    sim.add_argument("--pitch", type=float, help="pixel pitch in meters (overrides --width)")
    sim.add_argument("--wavelength", type=float, default=532e-9, help="wavelength in meters")
    sim.add_argument("--noise", default="none", help="none | gaussian:<sigma> | poisson:<peak>")
    sim.add_argument("--seed", type=int, default=0, help="noise RNG seed")
    sim.add_argument("--out", required=True, help="dataset output directory")
    sim.set_defaults(func=cmd_simulate)

    rec = sub.add_parser("reconstruct", help="run the iterative solver on a dataset")
    rec.add_argument("dataset", help="dataset directory")
    rec.add_argument("--init", default="ground-truth",
                     help="ground-truth | pupil-support | coarse | file:<path>")
    rec.add_argument("--coarse-stride", type=int, default=4,
                     help="stride for the coarse initializer (default 4)")
    rec.add_argument("--iters", type=int, default=100)
    rec.add_argument("--beta", type=float, default=1e-1, help="TV weight")
    rec.add_argument("--gamma", type=float, default=1e-3, help="phase sparsity weight")
    rec.add_argument("--dmax", type=int, default=9, help="initial search radius")
    rec.add_argument("--dmin", type=int, default=1, help="final search radius")
    rec.add_argument("--search-every", type=int, default=10)
    rec.add_argument("--epsilon", type=float, default=1e-8)
    rec.add_argument("--pupil-constraint", action="store_true",
                     help="also enforce measured pupil moduli (off by default)")
    rec.add_argument("--out", help="result directory (default <dataset>/result)")
    rec.set_defaults(func=cmd_reconstruct)

    ev = sub.add_parser("evaluate", help="score a result against a synthetic dataset")
    ev.add_argument("result", help="result directory")
    ev.add_argument("dataset", help="dataset directory holding the ground truth")
    ev.add_argument("--out", help="report path (default <result>/report.json)")
    ev.set_defaults(func=cmd_evaluate)

    pl = sub.add_parser("plot", help="emit amplitude/phase/k-space PNGs for a result")
    pl.add_argument("result", help="result directory")
    pl.add_argument("--dataset", help="dataset directory (enables truth overlays)")
    pl.add_argument("--no-truth", action="store_true", help="omit the truth series in kspace.png")
    pl.add_argument("--out", help="plot output directory (default the result directory)")
    pl.set_defaults(func=cmd_plot)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
