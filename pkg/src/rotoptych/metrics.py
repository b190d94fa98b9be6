"""Reconstruction quality metrics and aperture-overlap geometry."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .optics import ComplexField, ValidationError


def amplitude_rmse(recovered: ComplexField, truth: ComplexField) -> float:
    """Root-mean-square error between the two amplitude rasters.

    Invariant to global phase on either argument, since only |.| enters.
    """
    if recovered.data.shape != truth.data.shape:
        raise ValidationError("amplitude_rmse: shape mismatch")
    diff = np.abs(recovered.data) - np.abs(truth.data)
    return float(np.sqrt(np.mean(diff**2)))


def _wrap_to_pi(values: np.ndarray) -> np.ndarray:
    # map into (-pi, pi]
    wrapped = np.mod(values + np.pi, 2.0 * np.pi) - np.pi
    wrapped[wrapped == -np.pi] = np.pi
    return wrapped


def phase_rmse_offset_corrected(
    recovered: ComplexField,
    truth: ComplexField,
    mask_threshold: float | None = None,
) -> float:
    """RMS phase error after removing the global phase offset.

    The pixelwise difference angle(recovered) - angle(truth) is wrapped into
    (-pi, pi], its mean subtracted, and the residual re-wrapped before the RMS
    is taken, so a constant e^{i*phi} factor scores exactly zero.  With
    ``mask_threshold`` set, only pixels with |truth| > threshold contribute
    (reconstruction phase is unconstrained where the target is dark).
    """
    if recovered.data.shape != truth.data.shape:
        raise ValidationError("phase_rmse_offset_corrected: shape mismatch")
    err = _wrap_to_pi(np.angle(recovered.data) - np.angle(truth.data))
    if mask_threshold is not None:
        keep = np.abs(truth.data) > mask_threshold
        if not np.any(keep):
            return 0.0
        err = err[keep]
    residual = _wrap_to_pi(err - np.mean(err))
    return float(np.sqrt(np.mean(residual**2)))


def k_rmse(estimate, truth) -> float:
    """Root-mean-square Euclidean distance between two shift lists, in pixels."""
    a = np.asarray(estimate.shifts if hasattr(estimate, "shifts") else estimate, dtype=np.float64)
    b = np.asarray(truth.shifts if hasattr(truth, "shifts") else truth, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"k_rmse: length mismatch ({a.shape} vs {b.shape})")
    return float(np.sqrt(np.mean(np.sum((a - b) ** 2, axis=1))))


def per_record_k_error(estimate, truth) -> np.ndarray:
    """Euclidean shift error per record, in pixels."""
    a = np.asarray(estimate.shifts if hasattr(estimate, "shifts") else estimate, dtype=np.float64)
    b = np.asarray(truth.shifts if hasattr(truth, "shifts") else truth, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"per_record_k_error: length mismatch ({a.shape} vs {b.shape})")
    return np.sqrt(np.sum((a - b) ** 2, axis=1))


def overlap_fraction(center_distance: float, radius: float) -> float:
    """Area fraction shared by two disks of equal radius at the given spacing.

    Circle-intersection formula
    (2 r^2 arccos(d / 2r) - (d / 2) sqrt(4 r^2 - d^2)) / (pi r^2),
    continuous and monotonically decreasing down to 0 at d >= 2r.
    """
    if radius <= 0:
        raise ValidationError(f"radius must be > 0, got {radius}")
    if center_distance < 0:
        raise ValidationError(f"distance must be >= 0, got {center_distance}")
    d, r = float(center_distance), float(radius)
    if d >= 2.0 * r:
        return 0.0
    lens = 2.0 * r * r * math.acos(d / (2.0 * r)) - (d / 2.0) * math.sqrt(4.0 * r * r - d * d)
    return lens / (math.pi * r * r)


def overlap_fraction_pixels(center_distance: int, radius: float, grid_size: int) -> float:
    """Discrete counterpart: pixel count of the disk intersection over one disk.

    Counts lattice points inside both disks when their centers are separated
    by an integer number of pixels along one axis.
    """
    if radius <= 0 or grid_size < 2:
        raise ValidationError("invalid radius or grid size")
    c = grid_size // 2
    yy, xx = np.ogrid[:grid_size, :grid_size]
    disk = (yy - c) ** 2 + (xx - c) ** 2 <= radius**2
    shifted = (yy - c) ** 2 + (xx - c - center_distance) ** 2 <= radius**2
    denom = int(np.count_nonzero(disk))
    if denom == 0:
        return 0.0
    return float(np.count_nonzero(disk & shifted)) / denom


@dataclass
class EvalReport:
    """Scores for one reconstruction against ground truth."""

    amplitude_rmse: float
    phase_rmse: float
    phase_rmse_masked: float
    k_rmse: float
    per_record_k_error: list[float]
    overlap_fraction: float

    def to_dict(self) -> dict:
        return {
            "amplitude_rmse": self.amplitude_rmse,
            "phase_rmse": self.phase_rmse,
            "phase_rmse_masked": self.phase_rmse_masked,
            "k_rmse": self.k_rmse,
            "per_record_k_error": self.per_record_k_error,
            "overlap_fraction": self.overlap_fraction,
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


_MASK_THRESHOLD = 0.05  # |truth| cutoff for the masked phase metric


def evaluate(result, ms) -> EvalReport:
    """Score a ReconstructionResult against a synthetic MeasurementSet."""
    from .optics import rotation_to_pixel_shift

    if ms.target is None:
        raise ValidationError("evaluation requires a synthetic dataset with stored ground truth")
    truth_shifts = np.array(
        [rec.true_k.as_ints() for rec in ms.records], dtype=np.int64
    )
    corrected = np.asarray(result.corrected_k.shifts, dtype=np.int64)
    layout = ms.grid_layout or {}
    spacing_px = 0.0
    if layout.get("kind") == "grid":
        # real-valued spectral spacing between adjacent tilt positions
        n_pts = max(layout.get("nx", 1), layout.get("ny", 1))
        if n_pts > 1:
            from .optics import RotationAngle

            theta_step = 2.0 * layout["theta_max"] / (n_pts - 1)
            step = rotation_to_pixel_shift(RotationAngle(theta_step, 0.0), ms.config)
            spacing_px = abs(step.kx)
    return EvalReport(
        amplitude_rmse=amplitude_rmse(result.object_field, ms.target),
        phase_rmse=phase_rmse_offset_corrected(result.object_field, ms.target),
        phase_rmse_masked=phase_rmse_offset_corrected(
            result.object_field, ms.target, mask_threshold=_MASK_THRESHOLD
        ),
        k_rmse=k_rmse(corrected, truth_shifts),
        per_record_k_error=[float(e) for e in per_record_k_error(corrected, truth_shifts)],
        overlap_fraction=overlap_fraction(spacing_px, ms.config.aperture_radius)
        if spacing_px > 0
        else 1.0,
    )
