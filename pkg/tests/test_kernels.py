"""Parity between the compiled kernels and the numpy fallback."""

import os
import subprocess
import sys

import numpy as np
import pytest

from rotoptych import _kernels_np
from rotoptych._backend import BACKEND

try:
    from rotoptych import _kernels
except ImportError:
    _kernels = None

needs_ext = pytest.mark.skipif(_kernels is None, reason="compiled extension not built")


def random_complex(shape, seed):
    rng = np.random.default_rng(seed)
    return np.ascontiguousarray(
        rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    )


class TestNumpyReference:
    def test_amplitude_constraint_preserves_phase(self):
        psi = random_complex((32, 32), 0)
        sqrt_i = np.abs(random_complex((32, 32), 1))
        out = _kernels_np.amplitude_constraint(psi, sqrt_i, 1e-8)
        np.testing.assert_allclose(np.abs(out), sqrt_i, rtol=1e-12)
        live = np.abs(psi) ** 2 > 1e-8
        np.testing.assert_allclose(
            np.angle(out[live] / psi[live]), 0.0, atol=1e-12
        )

    def test_amplitude_constraint_dead_pixels_get_zero_phase(self):
        psi = np.zeros((4, 4), dtype=np.complex128)
        psi[0, 0] = 1e-9 + 1e-9j  # power 2e-18 <= epsilon
        sqrt_i = np.full((4, 4), 3.0)
        out = _kernels_np.amplitude_constraint(psi, sqrt_i, 1e-8)
        np.testing.assert_array_equal(out, 3.0 + 0.0j)

    def test_intensity_sse_definition(self):
        psi = random_complex((16, 16), 2)
        intensity = np.abs(random_complex((16, 16), 3)) ** 2
        want = np.sum((np.abs(psi) ** 2 - intensity) ** 2)
        assert _kernels_np.intensity_sse(psi, intensity) == pytest.approx(want, rel=1e-12)

    def test_sse_diff_stack_definition(self):
        stack = random_complex((5, 8, 8), 4)
        target = random_complex((8, 8), 5)
        want = [np.sum(np.abs(s - target) ** 2) for s in stack]
        np.testing.assert_allclose(_kernels_np.sse_diff_stack(stack, target), want, rtol=1e-12)


@needs_ext
class TestBackendParity:
    def test_amplitude_constraint_matches(self):
        for seed in range(5):
            psi = random_complex((64, 64), seed)
            # sprinkle dead pixels to exercise the epsilon branch
            psi.ravel()[seed :: 17] = 0.0
            sqrt_i = np.abs(random_complex((64, 64), 100 + seed))
            a = _kernels.amplitude_constraint(psi, sqrt_i, 1e-8)
            b = _kernels_np.amplitude_constraint(psi, sqrt_i, 1e-8)
            np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)

    def test_intensity_sse_matches(self):
        for seed in range(5):
            psi = random_complex((64, 64), seed)
            intensity = np.abs(random_complex((64, 64), 200 + seed)) ** 2
            a = _kernels.intensity_sse(psi, intensity)
            b = _kernels_np.intensity_sse(psi, intensity)
            assert a == pytest.approx(b, rel=1e-12)

    def test_sse_diff_stack_matches(self):
        stack = random_complex((49, 31, 31), 6)
        target = random_complex((31, 31), 7)
        a = _kernels.sse_diff_stack(stack, target)
        b = _kernels_np.sse_diff_stack(stack, target)
        np.testing.assert_allclose(a, b, rtol=1e-12)


class TestBackendSelection:
    def test_backend_reports_a_known_value(self):
        assert BACKEND in ("cython", "numpy")

    def test_env_var_forces_fallback(self):
        env = dict(os.environ, ROTOPTYCH_NO_EXT="1")
        out = subprocess.run(
            [sys.executable, "-c", "import rotoptych; print(rotoptych.BACKEND)"],
            capture_output=True,
            text=True,
            env=env,
            check=True,
        )
        assert out.stdout.strip() == "numpy"

    @needs_ext
    def test_extension_preferred_by_default(self):
        env = {k: v for k, v in os.environ.items() if k != "ROTOPTYCH_NO_EXT"}
        out = subprocess.run(
            [sys.executable, "-c", "import rotoptych; print(rotoptych.BACKEND)"],
            capture_output=True,
            text=True,
            env=env,
            check=True,
        )
        assert out.stdout.strip() == "cython"
