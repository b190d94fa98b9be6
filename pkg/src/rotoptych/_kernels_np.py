"""Pure-numpy reference implementations of the hot inner-loop kernels.

Selected by :mod:`rotoptych._backend` when the compiled extension is missing
or disabled.  Each function here is the semantic contract; the Cython versions
must match these bit-for-bit apart from floating-point summation order.
"""

from __future__ import annotations

import numpy as np


def amplitude_constraint(psi: np.ndarray, sqrt_i: np.ndarray, epsilon: float) -> np.ndarray:
    """Replace |psi| with sqrt_i, keeping the phase of psi.

    Where |psi|^2 <= epsilon the phase is treated as zero, so the output pixel
    is the real value sqrt_i.
    """
    power = psi.real**2 + psi.imag**2
    out = np.empty_like(psi)
    low = power <= epsilon
    safe = np.where(low, 1.0, np.sqrt(power))
    np.divide(psi, safe, out=out)
    out[low] = 1.0
    return out * sqrt_i


def intensity_sse(psi: np.ndarray, intensity: np.ndarray) -> float:
    """Sum of squared intensity residuals sum((|psi|^2 - I)^2)."""
    power = psi.real**2 + psi.imag**2
    d = power - intensity
    return float(np.dot(d.ravel(), d.ravel()))


def sse_diff_stack(stack: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Per-slice sum(|stack[c] - target|^2) for a (C, H, W) complex stack."""
    d = stack - target[None, :, :]
    return np.sum(d.real**2 + d.imag**2, axis=(1, 2))
