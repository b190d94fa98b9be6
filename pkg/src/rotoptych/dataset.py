"""On-disk formats: dataset directories, result directories, raw .f32 rasters.

A dataset directory holds ``manifest.json`` plus one headerless raw file per
raster: little-endian float32, row-major, N*N values.  A result directory
holds ``result.json`` plus ``amplitude/phase/spectrum_re/spectrum_im.f32``.
Round trips are bit-exact at float32 precision.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .optics import (
    ComplexField,
    OpticalConfig,
    RotationAngle,
    ValidationError,
    WaveVector,
)
from .sim import MeasurementRecord, MeasurementSet, NoiseSpec
from .solver import KSpaceEstimate, ReconstructionResult, SolverParams

MANIFEST_NAME = "manifest.json"
RESULT_NAME = "result.json"
_FORMAT = "rotoptych-dataset"
_VERSION = 1


def write_f32(path: Path, raster: np.ndarray) -> None:
    """Write a 2-D raster as raw little-endian float32, row-major."""
    np.ascontiguousarray(raster, dtype="<f4").tofile(path)


def read_f32(path: Path, grid_size: int) -> np.ndarray:
    """Read one N*N raw float32 raster back as float64."""
    data = np.fromfile(path, dtype="<f4")
    if data.size != grid_size * grid_size:
        raise ValidationError(
            f"{path.name}: expected {grid_size * grid_size} float32 values, found {data.size}"
        )
    return data.reshape(grid_size, grid_size).astype(np.float64)


def _angle_dict(angle: RotationAngle) -> dict:
    return {"theta_x": angle.theta_x, "theta_y": angle.theta_y}


def save_dataset(ms: MeasurementSet, out_dir: str | Path) -> Path:
    """Serialize a MeasurementSet into a dataset directory; returns the path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(max(len(ms.records) - 1, 0))))
    records_meta = []
    for rec in ms.records:
        image_name = f"image_{rec.index:0{width}d}.f32"
        pupil_name = f"pupil_{rec.index:0{width}d}.f32"
        write_f32(out / image_name, rec.image)
        write_f32(out / pupil_name, rec.pupil)
        true_k = None
        if rec.true_k is not None:
            kx, ky = rec.true_k.as_ints()
            true_k = {"kx": kx, "ky": ky}
        records_meta.append(
            {
                "index": rec.index,
                "angle": _angle_dict(rec.angle),
                "true_k": true_k,
                "image": image_name,
                "pupil": pupil_name,
            }
        )
    manifest = {
        "format": _FORMAT,
        "version": _VERSION,
        "config": {
            "wavelength": ms.config.wavelength,
            "grid_size": ms.config.grid_size,
            "pixel_pitch": ms.config.pixel_pitch,
            "aperture_radius": ms.config.aperture_radius,
        },
        "noise": {"kind": ms.noise.kind, "sigma": ms.noise.sigma, "peak": ms.noise.peak},
        "grid_layout": ms.grid_layout,
        "records": records_meta,
    }
    if ms.target is not None:
        write_f32(out / "target_amplitude.f32", np.abs(ms.target.data))
        write_f32(out / "target_phase.f32", np.angle(ms.target.data))
        manifest["target_amplitude"] = "target_amplitude.f32"
        manifest["target_phase"] = "target_phase.f32"
    with open(out / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return out


def load_dataset(in_dir: str | Path) -> MeasurementSet:
    """Load a dataset directory written by :func:`save_dataset`."""
    root = Path(in_dir)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise FileNotFoundError(f"no {MANIFEST_NAME} in {root}")
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format") != _FORMAT:
        raise ValidationError(f"{manifest_path}: not a {_FORMAT} manifest")
    cfg_meta = manifest["config"]
    config = OpticalConfig(
        wavelength=cfg_meta["wavelength"],
        grid_size=cfg_meta["grid_size"],
        pixel_pitch=cfg_meta["pixel_pitch"],
        aperture_radius=cfg_meta["aperture_radius"],
    )
    noise_meta = manifest.get("noise", {"kind": "none"})
    noise = NoiseSpec(
        kind=noise_meta.get("kind", "none"),
        sigma=noise_meta.get("sigma", 0.0),
        peak=noise_meta.get("peak", 0.0),
    )
    records = []
    for meta in manifest["records"]:
        angle = RotationAngle(meta["angle"]["theta_x"], meta["angle"]["theta_y"])
        true_k = None
        if meta.get("true_k") is not None:
            true_k = WaveVector(int(meta["true_k"]["kx"]), int(meta["true_k"]["ky"]))
        records.append(
            MeasurementRecord(
                index=meta["index"],
                angle=angle,
                true_k=true_k,
                image=read_f32(root / meta["image"], config.grid_size),
                pupil=read_f32(root / meta["pupil"], config.grid_size),
            )
        )
    target = None
    if "target_amplitude" in manifest:
        amp = read_f32(root / manifest["target_amplitude"], config.grid_size)
        phase = read_f32(root / manifest["target_phase"], config.grid_size)
        target = ComplexField(amp * np.exp(1j * phase), "spatial")
    return MeasurementSet(
        config=config,
        records=records,
        noise=noise,
        grid_layout=manifest.get("grid_layout", {}),
        target=target,
    )


def save_result(result: ReconstructionResult, out_dir: str | Path) -> Path:
    """Serialize a ReconstructionResult into a result directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    obj = result.object_field.data
    spec = result.spectrum.data
    write_f32(out / "amplitude.f32", np.abs(obj))
    write_f32(out / "phase.f32", np.angle(obj))
    write_f32(out / "spectrum_re.f32", spec.real)
    write_f32(out / "spectrum_im.f32", spec.imag)
    p = result.params
    meta = {
        "grid_size": result.spectrum.grid_size,
        "params": {
            "iterations": p.iterations,
            "beta": p.beta,
            "gamma": p.gamma,
            "delta_max": p.delta_max,
            "delta_min": p.delta_min,
            "search_every": p.search_every,
            "epsilon": p.epsilon,
            "use_pupil_constraint": p.use_pupil_constraint,
        },
        "initial_k": {
            "provenance": result.initial_k.provenance,
            "shifts": [[int(kx), int(ky)] for kx, ky in result.initial_k.shifts],
        },
        "corrected_k": {
            "provenance": result.corrected_k.provenance,
            "shifts": [[int(kx), int(ky)] for kx, ky in result.corrected_k.shifts],
        },
        "loss_trace": {
            "data": [float(v) for v in result.loss_trace["data"]],
            "tv": [float(v) for v in result.loss_trace["tv"]],
            "phase": [float(v) for v in result.loss_trace["phase"]],
        },
    }
    with open(out / RESULT_NAME, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    return out


def load_result(in_dir: str | Path) -> ReconstructionResult:
    """Load a result directory written by :func:`save_result`."""
    root = Path(in_dir)
    meta_path = root / RESULT_NAME
    if not meta_path.is_file():
        raise FileNotFoundError(f"no {RESULT_NAME} in {root}")
    with open(meta_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    n = meta["grid_size"]
    spec = read_f32(root / "spectrum_re.f32", n) + 1j * read_f32(root / "spectrum_im.f32", n)
    p = meta["params"]
    params = SolverParams(
        iterations=p["iterations"],
        beta=p["beta"],
        gamma=p["gamma"],
        delta_max=p["delta_max"],
        delta_min=p["delta_min"],
        search_every=p["search_every"],
        epsilon=p["epsilon"],
        use_pupil_constraint=p["use_pupil_constraint"],
    )

    def _estimate(key: str) -> KSpaceEstimate:
        return KSpaceEstimate(
            shifts=np.array(meta[key]["shifts"], dtype=np.int64).reshape(-1, 2),
            provenance=meta[key]["provenance"],
        )

    trace = {key: np.asarray(vals, dtype=np.float64) for key, vals in meta["loss_trace"].items()}
    from .solver import result_from_spectrum

    return result_from_spectrum(
        ComplexField(spec, "frequency"),
        initial_k=_estimate("initial_k"),
        corrected_k=_estimate("corrected_k"),
        loss_trace=trace,
        params=params,
    )
