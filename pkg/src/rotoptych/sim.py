"""Synthetic scene construction: targets, tilt grids, and measurement stacks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.ndimage

from .optics import (
    ComplexField,
    OpticalConfig,
    PupilMask,
    RotationAngle,
    ValidationError,
    WaveVector,
    fft_centered,
    make_circular_mask,
    rotation_to_pixel_shift,
    simulate_image_intensity,
    simulate_pupil_intensity,
)


@dataclass(frozen=True)
class NoiseSpec:
    """Detector noise model applied to each intensity raster.

    kind="none" leaves rasters untouched; "gaussian" adds zero-mean noise with
    standard deviation sigma * max(raster), clamped to >= 0; "poisson" draws
    counts after scaling the raster so its maximum equals ``peak`` photons,
    then scales back.
    """

    kind: str = "none"
    sigma: float = 0.0
    peak: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "gaussian", "poisson"):
            raise ValidationError(f"unknown noise kind {self.kind!r}")
        if self.kind == "gaussian" and not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise ValidationError(f"gaussian sigma must be >= 0, got {self.sigma}")
        if self.kind == "poisson" and not (self.peak > 0 and math.isfinite(self.peak)):
            raise ValidationError(f"poisson peak must be > 0, got {self.peak}")


@dataclass
class MeasurementRecord:
    """One tilt position: the angle, its true integer shift, and both rasters."""

    index: int
    angle: RotationAngle
    true_k: WaveVector | None
    image: np.ndarray
    pupil: np.ndarray


@dataclass
class MeasurementSet:
    """A full acquisition: geometry plus the per-tilt dual-plane rasters.

    ``target`` is populated for synthetic sets so reconstructions can be
    scored against ground truth; experimental sets leave it None.
    """

    config: OpticalConfig
    records: list[MeasurementRecord]
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    grid_layout: dict = field(default_factory=dict)
    target: ComplexField | None = None

    def __post_init__(self):
        n = self.config.grid_size
        for rec in self.records:
            for name, raster in (("image", rec.image), ("pupil", rec.pupil)):
                if raster.shape != (n, n):
                    raise ValidationError(
                        f"record {rec.index} {name} raster shape {raster.shape} != ({n}, {n})"
                    )
                if not np.all(np.isfinite(raster)) or np.any(raster < 0):
                    raise ValidationError(
                        f"record {rec.index} {name} raster has negative or non-finite values"
                    )

    def pupil_mask(self) -> PupilMask:
        return make_circular_mask(self.config.aperture_radius, self.config.grid_size)


def _resize_bilinear(src: np.ndarray, grid_size: int) -> np.ndarray:
    """Resample to (grid_size, grid_size) with corner-aligned bilinear weights."""
    src = np.asarray(src, dtype=np.float64)
    if src.ndim != 2 or src.size == 0:
        raise ValidationError(f"source image must be non-empty 2-D grayscale, got shape {src.shape}")
    if src.shape == (grid_size, grid_size):
        return src.copy()
    h, w = src.shape
    ys = np.linspace(0.0, h - 1.0, grid_size)
    xs = np.linspace(0.0, w - 1.0, grid_size)
    coords = np.meshgrid(ys, xs, indexing="ij")
    return scipy.ndimage.map_coordinates(src, coords, order=1, mode="nearest")


def _normalize_to_unit(src: np.ndarray) -> np.ndarray:
    peak = src.max() if src.size else 0.0
    if peak <= 0:
        return np.zeros_like(src)
    return src / peak


def build_complex_target(
    amplitude_source: np.ndarray,
    phase_source: np.ndarray | None,
    grid_size: int,
    phase_max: float = math.pi / 4,
) -> ComplexField:
    """Turn grayscale source images into a complex spatial target.

    The amplitude source is resized bilinearly and max-normalized to [0, 1];
    the phase source likewise, then scaled to [0, phase_max].  A constant
    (all-white) amplitude source becomes exactly 1 everywhere; an all-black
    one becomes 0.  ``phase_source=None`` yields a real target.

    Returns
    -------
    ComplexField
        Spatial-domain target a(x) * exp(i * phi(x)).
    """
    if not (0 <= phase_max <= 2 * math.pi):
        raise ValidationError(f"phase_max must lie in [0, 2*pi], got {phase_max}")
    amp = _normalize_to_unit(_resize_bilinear(amplitude_source, grid_size))
    if phase_source is None:
        phase = np.zeros((grid_size, grid_size))
    else:
        phase = phase_max * _normalize_to_unit(_resize_bilinear(phase_source, grid_size))
    return ComplexField(amp * np.exp(1j * phase), "spatial")


@dataclass
class AngleGrid:
    """A raster scan of tilt angles, row-major over (theta_y, theta_x)."""

    angles: list[RotationAngle]
    nx: int
    ny: int
    theta_max: float


def generate_rotation_grid(nx: int, ny: int, theta_max: float) -> AngleGrid:
    """Uniform nx-by-ny tilt grid spanning [-theta_max, theta_max] per axis.

    A single-point axis collapses to {0}, so any odd-sized grid contains the
    untilted (0, 0) position.
    """
    if nx < 1 or ny < 1:
        raise ValidationError(f"grid dimensions must be >= 1, got {nx}x{ny}")
    if not (0 <= theta_max < 0.01):
        raise ValidationError(f"theta_max must lie in [0, 0.01) rad, got {theta_max}")
    tx = np.linspace(-theta_max, theta_max, nx) if nx > 1 else np.array([0.0])
    ty = np.linspace(-theta_max, theta_max, ny) if ny > 1 else np.array([0.0])
    angles = [RotationAngle(float(x), float(y)) for y in ty for x in tx]
    return AngleGrid(angles, nx, ny, theta_max)


def add_noise(raster: np.ndarray, noise: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    """Apply one noise model draw to a nonnegative intensity raster."""
    if noise.kind == "none":
        return raster.copy()
    peak = float(raster.max())
    if noise.kind == "gaussian":
        noisy = raster + rng.normal(0.0, noise.sigma * peak, raster.shape)
        return np.clip(noisy, 0.0, None)
    # poisson: photon counts at the requested peak level, rescaled to input units
    if peak <= 0:
        rng.poisson(np.zeros_like(raster))
        return raster.copy()
    counts = rng.poisson(raster * (noise.peak / peak))
    return counts.astype(np.float64) * (peak / noise.peak)


def synthesize_dataset(
    target: ComplexField,
    grid: AngleGrid,
    config: OpticalConfig,
    noise: NoiseSpec | None = None,
    seed: int = 0,
) -> MeasurementSet:
    """Render the dual-plane measurement stack for a tilt scan of ``target``.

    Each angle is converted to its real-valued spectral shift, rounded to the
    integer grid (halves away from zero), validated against |k| <= N/2 - r,
    and used to simulate one image-plane and one pupil-plane raster.  Noise is
    drawn from a generator seeded once with ``seed`` (image raster first, then
    pupil, in record order), so equal inputs give bit-identical outputs.

    Returns
    -------
    MeasurementSet
        Records in grid order, with ``true_k`` and ``target`` retained.
    """
    if target.domain != "spatial":
        raise ValidationError("synthesize_dataset expects a spatial-domain target")
    if target.grid_size != config.grid_size:
        raise ValidationError(
            f"target grid {target.grid_size} != config grid {config.grid_size}"
        )
    noise = noise or NoiseSpec()
    rng = np.random.default_rng(seed)
    spectrum = fft_centered(target)
    pupil = make_circular_mask(config.aperture_radius, config.grid_size)
    bound = config.grid_size / 2 - config.aperture_radius
    records = []
    for idx, angle in enumerate(grid.angles):
        true_k = rotation_to_pixel_shift(angle, config).rounded()
        if abs(true_k.kx) > bound or abs(true_k.ky) > bound:
            raise ValidationError(
                f"angle ({angle.theta_x:g}, {angle.theta_y:g}) rad (record {idx}) maps to "
                f"shift ({true_k.kx:g}, {true_k.ky:g}), outside |k| <= N/2 - r = {bound:g}"
            )
        image = simulate_image_intensity(spectrum, pupil, true_k)
        pupil_raster = simulate_pupil_intensity(spectrum, pupil, true_k)
        records.append(
            MeasurementRecord(
                index=idx,
                angle=angle,
                true_k=true_k,
                image=add_noise(image, noise, rng),
                pupil=add_noise(pupil_raster, noise, rng),
            )
        )
    layout = {"kind": "grid", "nx": grid.nx, "ny": grid.ny, "theta_max": grid.theta_max}
    return MeasurementSet(config, records, noise, layout, target=target.copy())
