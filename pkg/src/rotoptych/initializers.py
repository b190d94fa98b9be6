"""Calibration-free initial k-shift estimates.

Three routes into the solver: a classical matched-filter localizer on the
pupil-plane disk, a coarse misfit grid search, and a loader for predictions
produced externally (the PredictionFile JSON contract).  A ground-truth
passthrough covers the calibrated baseline on synthetic sets.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import scipy.fft

from .optics import ValidationError, WaveVector, _round_half_away, make_circular_mask
from .sim import MeasurementSet
from .solver import (
    ComplexField,
    KSpaceEstimate,
    _effective_bound,
    _evaluate_candidates,
    _SearchContext,
)

_BINARIZE_FRACTION = 0.10  # relative threshold, scale-invariant by construction


def pupil_support_init(ms: MeasurementSet) -> KSpaceEstimate:
    """Locate each record's aperture disk in its pupil-plane intensity.

    The raster is binarized at 10% of its own maximum and correlated with the
    disk template; the correlation peak, read as an offset from grid center,
    is the estimate.  Ties across a plateau (common when the binarized
    support is a small blob inside the disk) are broken by the offset nearest
    the blob centroid, then lexicographically.  An empty raster yields (0, 0)
    and a warning entry.
    """
    n = ms.config.grid_size
    c = n // 2
    mask = make_circular_mask(ms.config.aperture_radius, n)
    template_spec = np.conj(scipy.fft.fft2(mask.mask))
    bound = _effective_bound(n, ms.config.aperture_radius)
    shifts = np.zeros((len(ms.records), 2), dtype=np.int64)
    warnings: list[str] = []
    for j, rec in enumerate(ms.records):
        peak = rec.pupil.max()
        if peak <= 0:
            warnings.append(f"record {rec.index}: empty pupil support, defaulting to (0, 0)")
            continue
        binarized = (rec.pupil > _BINARIZE_FRACTION * peak).astype(np.float64)
        # integer overlap counts of the blob with the disk at every offset
        raw = scipy.fft.ifft2(scipy.fft.fft2(binarized) * template_spec).real
        scores = np.rint(scipy.fft.fftshift(raw)).astype(np.int64)
        ys, xs = np.nonzero(binarized)
        centroid_x = float(xs.mean()) - c
        centroid_y = float(ys.mean()) - c
        kx_lo, kx_hi = c - int(bound), c + int(bound) + 1
        region = scores[kx_lo:kx_hi, kx_lo:kx_hi]
        best = region.max()
        ties_y, ties_x = np.nonzero(region == best)
        cand_kx = ties_x + (kx_lo - c)
        cand_ky = ties_y + (kx_lo - c)
        keys = (cand_kx - centroid_x) ** 2 + (cand_ky - centroid_y) ** 2
        order = np.lexsort((cand_ky, cand_kx, keys))[0]
        shifts[j] = (int(cand_kx[order]), int(cand_ky[order]))
    return KSpaceEstimate(shifts, "classical", warnings)


def coarse_misfit_init(
    ms: MeasurementSet, o_seed: ComplexField, stride: int, bound: int
) -> KSpaceEstimate:
    """Grid-restricted misfit search for every record against a seed spectrum.

    Evaluates the image-plane misfit on stride-spaced integer offsets in
    [-bound, bound]^2 (multiples of ``stride``, always including 0) and keeps
    the argmin under the solver's tie-break.
    """
    if stride < 1:
        raise ValidationError(f"stride must be >= 1, got {stride}")
    n = ms.config.grid_size
    on_grid = _effective_bound(n, ms.config.aperture_radius)
    if not 0 <= bound <= on_grid:
        raise ValidationError(f"bound {bound} outside the on-grid range [0, {on_grid}]")
    if o_seed.domain != "frequency" or o_seed.grid_size != n:
        raise ValidationError("o_seed must be a frequency-domain N x N field")
    steps = np.arange(0, bound + 1, stride)
    axis = np.unique(np.concatenate([-steps, steps]))
    gx, gy = np.meshgrid(axis, axis, indexing="xy")
    deltas = np.stack([gx.ravel(), gy.ravel()], axis=1)
    order = np.lexsort((deltas[:, 1], deltas[:, 0], np.sum(deltas**2, axis=1)))
    candidates = deltas[order]
    ctx = _SearchContext(ms.pupil_mask(), n)
    shifts = np.zeros((len(ms.records), 2), dtype=np.int64)
    for j, rec in enumerate(ms.records):
        intensity = np.ascontiguousarray(rec.image, dtype=np.float64)
        shifts[j] = _evaluate_candidates(ctx, o_seed.data, intensity, candidates, cache_key=j)
    return KSpaceEstimate(shifts, "classical")


def load_predictions(path: str | Path, ms: MeasurementSet) -> KSpaceEstimate:
    """Read externally produced shift predictions for a measurement set.

    The file is the PredictionFile JSON contract: a top-level object with a
    free-text ``source`` and a ``predictions`` array of
    ``{"index": int, "kx": float, "ky": float}``.  Real values are rounded
    (halves away from zero); indices must cover every record exactly once and
    rounded shifts must stay on-grid.
    """
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict) or "predictions" not in payload:
        raise ValidationError(f"{path}: not a prediction file (missing 'predictions')")
    entries = payload["predictions"]
    n_rec = len(ms.records)
    seen: dict[int, tuple[int, int]] = {}
    for entry in entries:
        idx = entry["index"]
        if not isinstance(idx, int) or not 0 <= idx < n_rec:
            raise ValidationError(f"{path}: prediction index {idx} out of range")
        if idx in seen:
            raise ValidationError(f"{path}: duplicate prediction for index {idx}")
        seen[idx] = (_round_half_away(float(entry["kx"])), _round_half_away(float(entry["ky"])))
    missing = sorted(set(range(n_rec)) - set(seen))
    if missing:
        raise ValidationError(f"{path}: missing indices: {missing}")
    bound = _effective_bound(ms.config.grid_size, ms.config.aperture_radius)
    shifts = np.zeros((n_rec, 2), dtype=np.int64)
    for idx in range(n_rec):
        kx, ky = seen[idx]
        if abs(kx) > bound or abs(ky) > bound:
            raise ValidationError(
                f"{path}: record {idx} shift ({kx}, {ky}) violates |k| <= {bound}"
            )
        shifts[idx] = (kx, ky)
    return KSpaceEstimate(shifts, "external")


def save_predictions(shifts, path: str | Path, source: str = "rotoptych") -> None:
    """Write shifts in the PredictionFile JSON format (round-trip helper)."""
    arr = np.asarray(shifts.shifts if hasattr(shifts, "shifts") else shifts)
    payload = {
        "source": source,
        "predictions": [
            {"index": int(i), "kx": float(kx), "ky": float(ky)}
            for i, (kx, ky) in enumerate(arr)
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def ground_truth_init(ms: MeasurementSet) -> KSpaceEstimate:
    """Copy the stored true shifts (calibrated baseline); synthetic sets only."""
    if any(rec.true_k is None for rec in ms.records):
        raise ValidationError("ground_truth_init requires a synthetic set with true_k stored")
    shifts = np.array([rec.true_k.as_ints() for rec in ms.records], dtype=np.int64)
    return KSpaceEstimate(shifts, "ground_truth")


def initializer_by_name(name: str, ms: MeasurementSet, **kwargs) -> KSpaceEstimate:
    """Dispatch used by the CLI: ground-truth | pupil-support | coarse | file:<path>."""
    if name == "ground-truth":
        return ground_truth_init(ms)
    if name == "pupil-support":
        return pupil_support_init(ms)
    if name == "coarse":
        from .solver import initialize_object

        stride = kwargs.get("stride", 4)
        bound = kwargs.get("bound")
        if bound is None:
            bound = int(_effective_bound(ms.config.grid_size, ms.config.aperture_radius))
        seed = initialize_object(ms, record_index=kwargs.get("seed_record", 0))
        return coarse_misfit_init(ms, seed, stride=stride, bound=bound)
    if name.startswith("file:"):
        return load_predictions(name[5:], ms)
    raise ValidationError(f"unknown initializer {name!r}")
