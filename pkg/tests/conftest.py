"""Shared fixtures: small synthetic scenes the module tests reuse."""

import numpy as np
import pytest
import scipy.ndimage

import rotoptych as rp


def smooth_texture(n: int, seed: int, blur: float = 3.0) -> np.ndarray:
    """Seeded positive texture in [0, 1] with most energy at low frequencies."""
    rng = np.random.default_rng(seed)
    img = scipy.ndimage.gaussian_filter(rng.random((n, n)), blur, mode="wrap")
    img -= img.min()
    return img / img.max()


def bandlimited_field(n: int = 64) -> rp.ComplexField:
    """Target whose whole spectrum sits within 3 bins of DC.

    With an r=8 pupil and shifts up to 4 px every projection keeps all of its
    modes, so the forward model is lossless for this field and constraint
    steps are exact; the dominant DC term keeps |o| bounded away from zero.
    """
    spec = np.zeros((n, n), dtype=np.complex128)
    c = n // 2
    spec[c, c] = 8.0
    spec[c + 1, c - 2] = 0.9 + 0.4j
    spec[c - 2, c + 1] = 0.5 - 0.3j
    spec[c + 2, c + 2] = 0.3 + 0.2j
    return rp.ifft_centered(rp.ComplexField(spec, "frequency"))


def scene_config(n: int = 64, radius: float = 8.0) -> rp.OpticalConfig:
    return rp.OpticalConfig(
        wavelength=532e-9, grid_size=n, pixel_pitch=100.0 / n, aperture_radius=radius
    )


def theta_for_kmax(kmax: float, config: rp.OpticalConfig) -> float:
    """Tilt amplitude whose spectral shift is exactly kmax pixels."""
    return rp.pixel_shift_to_rotation(rp.WaveVector(float(kmax), 0.0), config).theta_x


def truth_shifts(ms) -> np.ndarray:
    return np.array([rec.true_k.as_ints() for rec in ms.records], dtype=np.int64)


@pytest.fixture(scope="session")
def small_scene():
    """5x5 grid on a 64-px smooth texture, overlap comparable to the default
    space scene (spacing 6 px, r = 8 -> 53% neighbor overlap)."""
    cfg = scene_config()
    target = rp.build_complex_target(smooth_texture(64, 0), smooth_texture(64, 1), 64)
    grid = rp.generate_rotation_grid(5, 5, theta_for_kmax(12, cfg))
    return rp.synthesize_dataset(target, grid, cfg, rp.NoiseSpec(), seed=0)


@pytest.fixture(scope="session")
def bandlimited_scene():
    """3x3 grid over the bandlimited target: every record fully observes it."""
    cfg = scene_config()
    target = bandlimited_field(64)
    grid = rp.generate_rotation_grid(3, 3, theta_for_kmax(4, cfg))
    return rp.synthesize_dataset(target, grid, cfg, rp.NoiseSpec(), seed=0)
