"""Core optical field types and the dual-plane measurement operators.

Conventions used throughout the package:

* Arrays are indexed ``[y, x]``; a wave vector ``(kx, ky)`` addresses axis 1
  with ``kx`` and axis 0 with ``ky``.
* Frequency-domain rasters are centered: the DC bin lives at index
  ``(N // 2, N // 2)``.  Grids are square with even ``N``.
* ``fft_centered`` / ``ifft_centered`` are unitary, so Parseval holds exactly
  (up to float64 rounding) and forward/inverse round trips are lossless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft


class ValidationError(ValueError):
    """Raised when a field, config, or operator argument violates its contract."""


def _round_half_away(x: float) -> int:
    """Round to nearest integer, halves away from zero (-2.5 -> -3, 2.5 -> 3)."""
    return int(math.floor(x + 0.5)) if x >= 0 else int(math.ceil(x - 0.5))


@dataclass
class ComplexField:
    """A complex-valued square raster tagged with the plane it lives in.

    Parameters
    ----------
    data : np.ndarray
        Square 2-D array, coerced to complex128.  Must be finite and have
        even side length >= 2.
    domain : str
        Either ``"spatial"`` or ``"frequency"``.
    """

    data: np.ndarray
    domain: str

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.complex128)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValidationError(f"field must be square 2-D, got shape {arr.shape}")
        n = arr.shape[0]
        if n < 2 or n % 2 != 0:
            raise ValidationError(f"grid size must be even and >= 2, got {n}")
        if not np.all(np.isfinite(arr.view(np.float64))):
            raise ValidationError("field contains non-finite values")
        if self.domain not in ("spatial", "frequency"):
            raise ValidationError(f"unknown domain {self.domain!r}")
        self.data = arr

    @property
    def grid_size(self) -> int:
        return self.data.shape[0]

    def energy(self) -> float:
        """Total power sum(|data|^2)."""
        return float(np.sum(np.abs(self.data) ** 2))

    def copy(self) -> "ComplexField":
        return ComplexField(self.data.copy(), self.domain)


@dataclass(frozen=True)
class OpticalConfig:
    """Physical geometry of one measurement setup.

    Attributes
    ----------
    wavelength : float
        Illumination wavelength in meters.
    grid_size : int
        Side length N of the simulation rasters (even, >= 2).
    pixel_pitch : float
        Spatial sampling interval in meters per pixel.
    aperture_radius : float
        Pupil radius in frequency-plane pixels; 0 < r < N / 2.
    """

    wavelength: float
    grid_size: int
    pixel_pitch: float
    aperture_radius: float

    def __post_init__(self):
        if not (self.wavelength > 0 and math.isfinite(self.wavelength)):
            raise ValidationError(f"wavelength must be positive, got {self.wavelength}")
        if self.grid_size < 2 or self.grid_size % 2 != 0:
            raise ValidationError(f"grid size must be even and >= 2, got {self.grid_size}")
        if not (self.pixel_pitch > 0 and math.isfinite(self.pixel_pitch)):
            raise ValidationError(f"pixel pitch must be positive, got {self.pixel_pitch}")
        if not 0 < self.aperture_radius < self.grid_size / 2:
            raise ValidationError(
                f"aperture radius must lie in (0, N/2), got {self.aperture_radius}"
            )

    @property
    def freq_pitch(self) -> float:
        """Frequency-plane sampling interval 1 / (N * pixel_pitch), in 1/m."""
        return 1.0 / (self.grid_size * self.pixel_pitch)


@dataclass(frozen=True)
class WaveVector:
    """A spectral shift in frequency-plane pixels; integer-valued once rounded."""

    kx: float
    ky: float

    def rounded(self) -> "WaveVector":
        return WaveVector(_round_half_away(self.kx), _round_half_away(self.ky))

    def as_ints(self) -> tuple[int, int]:
        if self.kx != int(self.kx) or self.ky != int(self.ky):
            raise ValidationError(f"wave vector ({self.kx}, {self.ky}) is not integer")
        return int(self.kx), int(self.ky)


@dataclass(frozen=True)
class RotationAngle:
    """Target tilt about the two transverse axes, in radians; |theta| < 0.01."""

    theta_x: float
    theta_y: float

    def __post_init__(self):
        for name, value in (("theta_x", self.theta_x), ("theta_y", self.theta_y)):
            if not (math.isfinite(value) and abs(value) < 0.01):
                raise ValidationError(f"{name} must satisfy |theta| < 0.01 rad, got {value}")


@dataclass
class PupilMask:
    """Binary circular low-pass mask, centered on the DC bin."""

    mask: np.ndarray
    radius: float

    @property
    def grid_size(self) -> int:
        return self.mask.shape[0]

    def support_count(self) -> int:
        return int(np.count_nonzero(self.mask))


def fft_centered(field: ComplexField) -> ComplexField:
    """Unitary 2-D DFT taking a centered spatial raster to a centered spectrum.

    Parameters
    ----------
    field : ComplexField
        Spatial-domain input.

    Returns
    -------
    ComplexField
        Frequency-domain output with DC at index (N//2, N//2).
    """
    if field.domain != "spatial":
        raise ValidationError("fft_centered expects a spatial-domain field")
    out = scipy.fft.fftshift(scipy.fft.fft2(scipy.fft.ifftshift(field.data), norm="ortho"))
    return ComplexField(out, "frequency")


def ifft_centered(field: ComplexField) -> ComplexField:
    """Inverse of :func:`fft_centered`; takes a centered spectrum to space."""
    if field.domain != "frequency":
        raise ValidationError("ifft_centered expects a frequency-domain field")
    out = scipy.fft.fftshift(scipy.fft.ifft2(scipy.fft.ifftshift(field.data), norm="ortho"))
    return ComplexField(out, "spatial")


def _fft2c(arr: np.ndarray) -> np.ndarray:
    # raw-array fast path shared by the solver loops (same convention as fft_centered)
    return scipy.fft.fftshift(scipy.fft.fft2(scipy.fft.ifftshift(arr), norm="ortho"))


def _ifft2c(arr: np.ndarray) -> np.ndarray:
    return scipy.fft.fftshift(scipy.fft.ifft2(scipy.fft.ifftshift(arr), norm="ortho"))


def make_circular_mask(radius: float, grid_size: int) -> PupilMask:
    """Build the binary pupil: 1 where (y-c)^2 + (x-c)^2 <= r^2, else 0.

    Parameters
    ----------
    radius : float
        Disk radius in pixels, 0 < radius < grid_size / 2.
    grid_size : int
        Side length of the (even) square raster.

    Returns
    -------
    PupilMask
    """
    if grid_size < 2 or grid_size % 2 != 0:
        raise ValidationError(f"grid size must be even and >= 2, got {grid_size}")
    if not 0 < radius < grid_size / 2:
        raise ValidationError(f"radius must lie in (0, N/2), got {radius}")
    c = grid_size // 2
    yy, xx = np.ogrid[:grid_size, :grid_size]
    mask = ((yy - c) ** 2 + (xx - c) ** 2 <= radius**2).astype(np.float64)
    return PupilMask(mask, float(radius))


def _check_shift_in_range(kx: int, ky: int, grid_size: int, radius: float) -> None:
    # the shifted aperture must stay inside the computational window
    bound = grid_size / 2 - radius
    if abs(kx) > bound or abs(ky) > bound:
        raise ValidationError(
            f"shift ({kx}, {ky}) exceeds |k| <= N/2 - r = {bound} for N={grid_size}, r={radius}"
        )


def simulate_image_intensity(
    spectrum: ComplexField, pupil: PupilMask, shift: WaveVector
) -> np.ndarray:
    """Image-plane intensity |F^-1{ O(k - k_j) * M(k) }|^2 for one tilt.

    Rotating the target translates its spectrum by ``shift`` before the fixed
    pupil cuts out the passband; the camera records the squared modulus of the
    resulting field.

    Parameters
    ----------
    spectrum : ComplexField
        Frequency-domain object estimate O(k).
    pupil : PupilMask
        Centered binary aperture M(k).
    shift : WaveVector
        Integer spectral displacement (kx, ky) in pixels.

    Returns
    -------
    np.ndarray
        Real float64 raster, shape (N, N).
    """
    if spectrum.domain != "frequency":
        raise ValidationError("simulate_image_intensity expects a frequency-domain field")
    if spectrum.grid_size != pupil.grid_size:
        raise ValidationError("spectrum and pupil grids differ")
    kx, ky = shift.as_ints()
    _check_shift_in_range(kx, ky, spectrum.grid_size, pupil.radius)
    shifted = np.roll(spectrum.data, (ky, kx), axis=(0, 1))
    psi = _ifft2c(shifted * pupil.mask)
    return np.abs(psi) ** 2


def simulate_pupil_intensity(
    spectrum: ComplexField, pupil: PupilMask, shift: WaveVector
) -> np.ndarray:
    """Pupil-plane intensity |O(k) * M(k - k_j)|^2 for one tilt.

    The Fourier-plane camera sees the stationary spectrum through the aperture
    displaced to ``center + shift``: a disk of spectral power riding with the
    rotation.

    Parameters
    ----------
    spectrum : ComplexField
        Frequency-domain object estimate O(k).
    pupil : PupilMask
        Centered binary aperture M(k).
    shift : WaveVector
        Integer spectral displacement (kx, ky) in pixels.

    Returns
    -------
    np.ndarray
        Real float64 raster, shape (N, N).
    """
    if spectrum.domain != "frequency":
        raise ValidationError("simulate_pupil_intensity expects a frequency-domain field")
    if spectrum.grid_size != pupil.grid_size:
        raise ValidationError("spectrum and pupil grids differ")
    kx, ky = shift.as_ints()
    _check_shift_in_range(kx, ky, spectrum.grid_size, pupil.radius)
    shifted_mask = np.roll(pupil.mask, (ky, kx), axis=(0, 1))
    return np.abs(spectrum.data * shifted_mask) ** 2


def rotation_to_pixel_shift(angle: RotationAngle, config: OpticalConfig) -> WaveVector:
    """Convert a target tilt to the spectral displacement it induces, in pixels.

    A reflective tilt of theta deflects the return beam by 2*theta, i.e. a
    transverse frequency of 2*theta / lambda, which spans
    (2*theta / lambda) / freq_pitch = 2*theta*N*pixel_pitch / lambda pixels.
    The result is real-valued; round only when synthesizing measurements.
    """
    scale = 2.0 * config.grid_size * config.pixel_pitch / config.wavelength
    return WaveVector(scale * angle.theta_x, scale * angle.theta_y)


def pixel_shift_to_rotation(shift: WaveVector, config: OpticalConfig) -> RotationAngle:
    """Exact algebraic inverse of :func:`rotation_to_pixel_shift`."""
    scale = config.wavelength / (2.0 * config.grid_size * config.pixel_pitch)
    return RotationAngle(scale * shift.kx, scale * shift.ky)
