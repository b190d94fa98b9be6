"""Time the compiled kernels against the numpy fallback.

Run from the repo root after an editable install:

    python3 benchmarks/kernel_bench.py

The solver spends most of its time in amplitude_constraint (once per record
per sweep) and, when the shift search is active, in sse_diff_stack over the
candidate stacks.  Sizes below mirror the full-scale scene: 256x256 fields,
a 121-record sweep, and 13x13 search windows on 33x33 patches.
"""

from __future__ import annotations

import time

import numpy as np

from rotoptych import _kernels_np

try:
    from rotoptych import _kernels

    HAVE_EXT = True
except ImportError:
    _kernels = None
    HAVE_EXT = False


def _field(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _bench(fn, args, repeats=7, loops=20):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(loops):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / loops)
    return best


def main():
    rng = np.random.default_rng(0)
    n = 256

    psi = _field(rng, (n, n))
    psi.ravel()[::31] = 0.0  # exercise the dead-pixel branch
    sqrt_i = np.abs(_field(rng, (n, n)))
    intensity = sqrt_i**2
    stack = _field(rng, (169, 33, 33))
    patch = _field(rng, (33, 33))

    cases = [
        ("amplitude_constraint 256^2", "amplitude_constraint", (psi, sqrt_i, 1e-8)),
        ("intensity_sse 256^2", "intensity_sse", (psi, intensity)),
        ("sse_diff_stack 169x33^2", "sse_diff_stack", (stack, patch)),
    ]

    print(f"{'kernel':<28} {'numpy':>10} {'cython':>10} {'speedup':>8}")
    for label, name, args in cases:
        t_np = _bench(getattr(_kernels_np, name), args)
        if HAVE_EXT:
            t_cy = _bench(getattr(_kernels, name), args)
            print(f"{label:<28} {t_np * 1e6:>8.1f}us {t_cy * 1e6:>8.1f}us {t_np / t_cy:>7.2f}x")
        else:
            print(f"{label:<28} {t_np * 1e6:>8.1f}us {'n/a':>10} {'n/a':>8}")

    if not HAVE_EXT:
        print("\ncompiled extension not importable; run pip install -e . first")


if __name__ == "__main__":
    main()
