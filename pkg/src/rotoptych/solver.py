"""Joint spectrum and k-shift recovery from dual-plane intensity stacks.

The reconstruction alternates three steps per sweep: project the spectrum
estimate through each shifted passband and enforce the measured image-plane
modulus; apply a batch gradient update assembled from the data misfit, a
total-variation term, and a phase-sparsity term; periodically re-estimate
each record's integer spectral shift by exhaustive local search with an
annealed radius.

Shift search cost note: for a passband of bounding-box size b on an N-grid
with 2b-1 <= N, the image intensity is bandlimited, so its misfit against a
measurement splits (by Parseval) into a constant plus a comparison over the
centered (2b-1)^2 spectral patch.  That patch is the autocorrelation of the
masked spectrum window and is computed with small FFTs, making the candidate
sweep much cheaper than full-grid projections while returning the same
argmin.  Masks too large for the patch identity fall back to the full-grid
evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from . import _backend as kernels
from .optics import (
    ComplexField,
    PupilMask,
    ValidationError,
    WaveVector,
    _fft2c,
    _ifft2c,
    _round_half_away,
)
from .sim import MeasurementSet

_PROVENANCES = ("ground_truth", "classical", "external", "corrected")


@dataclass(frozen=True)
class SolverParams:
    """Reconstruction hyperparameters; defaults follow the reference setup."""

    iterations: int = 100
    beta: float = 1e-1
    gamma: float = 1e-3
    delta_max: int = 9
    delta_min: int = 1
    search_every: int = 10
    epsilon: float = 1e-8
    use_pupil_constraint: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ValidationError(f"iterations must be >= 1, got {self.iterations}")
        if not self.delta_max >= self.delta_min >= 0:
            raise ValidationError(
                f"need delta_max >= delta_min >= 0, got {self.delta_max}, {self.delta_min}"
            )
        if self.search_every < 1:
            raise ValidationError(f"search_every must be >= 1, got {self.search_every}")
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValidationError(f"epsilon must be > 0, got {self.epsilon}")
        if self.beta < 0 or self.gamma < 0:
            raise ValidationError("regularization weights must be >= 0")


@dataclass
class KSpaceEstimate:
    """Integer spectral shifts for every record, tagged with their origin."""

    shifts: np.ndarray  # (M, 2) int64, columns (kx, ky)
    provenance: str
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        arr = np.asarray(self.shifts, dtype=np.int64).reshape(-1, 2)
        self.shifts = arr
        if self.provenance not in _PROVENANCES:
            raise ValidationError(f"unknown provenance {self.provenance!r}")

    def __len__(self) -> int:
        return self.shifts.shape[0]

    def wave_vectors(self) -> list[WaveVector]:
        return [WaveVector(int(kx), int(ky)) for kx, ky in self.shifts]


@dataclass
class ReconstructionResult:
    """Final spectrum, its spatial field, corrected shifts, and loss history."""

    spectrum: ComplexField
    object_field: ComplexField
    corrected_k: KSpaceEstimate
    initial_k: KSpaceEstimate
    loss_trace: dict[str, np.ndarray]
    params: SolverParams


def result_from_spectrum(
    spectrum: ComplexField,
    initial_k: KSpaceEstimate,
    corrected_k: KSpaceEstimate,
    loss_trace: dict[str, np.ndarray],
    params: SolverParams,
) -> ReconstructionResult:
    """Assemble a result whose object is exactly the inverse DFT of ``spectrum``."""
    if spectrum.domain != "frequency":
        raise ValidationError("result spectrum must be frequency-domain")
    object_field = ComplexField(_ifft2c(spectrum.data), "spatial")
    return ReconstructionResult(
        spectrum=spectrum,
        object_field=object_field,
        corrected_k=corrected_k,
        initial_k=initial_k,
        loss_trace=loss_trace,
        params=params,
    )


def _effective_bound(grid_size: int, radius: float) -> float:
    # full-pass masks (radius >= N/2) still admit the zero shift
    return max(0.0, grid_size / 2.0 - radius)


def _check_on_grid(kx: int, ky: int, grid_size: int, radius: float) -> bool:
    bound = _effective_bound(grid_size, radius)
    return abs(kx) <= bound and abs(ky) <= bound


def initialize_object(
    ms: MeasurementSet,
    record_index: int | None = None,
    k_estimates: KSpaceEstimate | None = None,
) -> ComplexField:
    """Spectrum seed: the DFT of one measured image amplitude with zero phase.

    When ``record_index`` is omitted, the record whose k-estimate is nearest
    (0, 0) is used (ties broken by smallest (kx, ky), then record order);
    estimates default to the dataset's true shifts, then to record 0.
    """
    if record_index is None:
        if k_estimates is not None:
            shifts = np.asarray(k_estimates.shifts)
        elif all(rec.true_k is not None for rec in ms.records):
            shifts = np.array([rec.true_k.as_ints() for rec in ms.records])
        else:
            shifts = None
        if shifts is None:
            record_index = 0
        else:
            keys = [
                (int(kx * kx + ky * ky), int(kx), int(ky), idx)
                for idx, (kx, ky) in enumerate(shifts)
            ]
            record_index = min(keys)[3]
    if not 0 <= record_index < len(ms.records):
        raise ValidationError(f"record index {record_index} out of range")
    amplitude = np.sqrt(ms.records[record_index].image)
    return ComplexField(_fft2c(amplitude.astype(np.complex128)), "frequency")


def image_projection(o_hat: ComplexField, mask: PupilMask, k: WaveVector) -> ComplexField:
    """Project the spectrum estimate to the image plane for one shift.

    psi = inverse-DFT( O(k - k_j) * M(k) ): shift the spectrum, cut the
    passband, go to space.
    """
    if o_hat.domain != "frequency":
        raise ValidationError("image_projection expects a frequency-domain field")
    kx, ky = k.as_ints()
    if not _check_on_grid(kx, ky, o_hat.grid_size, mask.radius):
        raise ValidationError(f"shift ({kx}, {ky}) is off-grid for radius {mask.radius}")
    shifted = np.roll(o_hat.data, (ky, kx), axis=(0, 1))
    return ComplexField(_ifft2c(shifted * mask.mask), "spatial")


def apply_image_constraint(psi: ComplexField, intensity: np.ndarray, epsilon: float = 1e-8) -> ComplexField:
    """Replace the field modulus with the measured sqrt(I), keeping the phase.

    Where |psi|^2 <= epsilon the phase is undefined; the measured amplitude is
    adopted with zero phase.
    """
    if psi.data.shape != intensity.shape:
        raise ValidationError("apply_image_constraint: shape mismatch")
    sqrt_i = np.sqrt(np.ascontiguousarray(intensity, dtype=np.float64))
    out = kernels.amplitude_constraint(np.ascontiguousarray(psi.data), sqrt_i, epsilon)
    return ComplexField(out, psi.domain)


def apply_pupil_constraint(
    big_psi: ComplexField, pupil_intensity: np.ndarray, epsilon: float = 1e-8
) -> ComplexField:
    """Modulus replacement in the frequency domain against a pupil measurement.

    Same contract as :func:`apply_image_constraint`.  The reconstruction loop
    only invokes this when SolverParams.use_pupil_constraint is set; the
    default pipeline omits it.
    """
    if big_psi.data.shape != pupil_intensity.shape:
        raise ValidationError("apply_pupil_constraint: shape mismatch")
    sqrt_p = np.sqrt(np.ascontiguousarray(pupil_intensity, dtype=np.float64))
    out = kernels.amplitude_constraint(np.ascontiguousarray(big_psi.data), sqrt_p, epsilon)
    return ComplexField(out, big_psi.domain)


def data_update(
    o_hat: ComplexField,
    psi_records: list[tuple[ComplexField, WaveVector]],
    mask: PupilMask,
    epsilon: float = 1e-8,
) -> ComplexField:
    """Second-order data correction assembled from all constrained projections.

    Each record contributes M(k + k_j) * (O(k) - Psi_j(k + k_j)): the
    constrained pupil-plane field is unshifted back into the global frame and
    compared against the current spectrum over its informed disk.  The sum is
    normalized by the aperture coverage sum(M(k + k_j)^2) + epsilon.

    Parameters
    ----------
    o_hat : ComplexField
        Current frequency-domain estimate O(k).
    psi_records : list of (ComplexField, WaveVector)
        Constrained back-projections, still in their shifted frames, paired
        with the shift k_j used to project them.
    mask : PupilMask
        The shared centered aperture.
    epsilon : float
        Denominator stabilizer.
    """
    if not psi_records:
        raise ValidationError("data_update requires at least one record")
    if o_hat.domain != "frequency":
        raise ValidationError("data_update expects a frequency-domain estimate")
    numerator = np.zeros_like(o_hat.data)
    coverage = np.zeros(o_hat.data.shape, dtype=np.float64)
    m = mask.mask
    for big_psi, k in psi_records:
        if big_psi.domain != "frequency":
            raise ValidationError("constrained projections must be frequency-domain")
        kx, ky = k.as_ints()
        shifted_estimate = np.roll(o_hat.data, (ky, kx), axis=(0, 1))
        # M * (O_shifted - Psi) in the shifted frame, then unshift to global
        numerator += np.roll(m * (shifted_estimate - big_psi.data), (-ky, -kx), axis=(0, 1))
        coverage += np.roll(m, (-ky, -kx), axis=(0, 1)) ** 2
    return ComplexField(numerator / (coverage + epsilon), "frequency")


def _tv_terms(o: np.ndarray, epsilon: float) -> tuple[np.ndarray, float]:
    """Spatial TV gradient and loss on the smoothed functional sum sqrt(|grad o|^2 + eps^2)."""
    gx = np.roll(o, -1, axis=1) - o  # forward differences, periodic wrap
    gy = np.roll(o, -1, axis=0) - o
    mag = np.sqrt(np.abs(gx) ** 2 + np.abs(gy) ** 2 + epsilon**2)
    loss = float(np.sum(mag))
    wx = gx / mag
    wy = gy / mag
    div = (wx - np.roll(wx, 1, axis=1)) + (wy - np.roll(wy, 1, axis=0))
    return -div, loss


def tv_gradient(o_hat: ComplexField, epsilon: float = 1e-8) -> ComplexField:
    """Gradient of the smoothed total variation of o = inverse-DFT(O).

    Forward differences build the gradient field, the adjoint (negative
    backward-difference divergence) of grad o / sqrt(|grad o|^2 + eps^2)
    forms the spatial gradient, and the unitary DFT carries it back to the
    frequency domain, where the update is applied.
    """
    if o_hat.domain != "frequency":
        raise ValidationError("tv_gradient expects a frequency-domain field")
    g, _ = _tv_terms(_ifft2c(o_hat.data), epsilon)
    return ComplexField(_fft2c(g), "frequency")


def tv_loss(o_hat: ComplexField, epsilon: float = 1e-8) -> float:
    """Value of the smoothed TV functional for o = inverse-DFT(O)."""
    _, loss = _tv_terms(_ifft2c(o_hat.data), epsilon)
    return loss


def _phase_terms(o: np.ndarray, epsilon: float) -> tuple[np.ndarray, float]:
    theta = np.angle(o)
    g = 2j * theta * o / (np.abs(o) ** 2 + epsilon)
    return g, float(np.sum(theta**2))


def phase_gradient(o_hat: ComplexField, epsilon: float = 1e-8) -> ComplexField:
    """Gradient of the phase-sparsity penalty L = sum angle(o)^2.

    Pointwise in space the Wirtinger-style real gradient is
    2i * angle(o) * o / (|o|^2 + epsilon): purely tangential, rotating each
    pixel's phase toward zero without touching its modulus.
    """
    if o_hat.domain != "frequency":
        raise ValidationError("phase_gradient expects a frequency-domain field")
    g, _ = _phase_terms(_ifft2c(o_hat.data), epsilon)
    return ComplexField(_fft2c(g), "frequency")


def phase_loss(o_hat: ComplexField) -> float:
    """Value of the phase-sparsity penalty sum angle(o)^2."""
    o = _ifft2c(o_hat.data)
    return float(np.sum(np.angle(o) ** 2))


def step_size_alpha(mask: PupilMask, k_estimates: KSpaceEstimate) -> np.ndarray:
    """Data-term step raster sum_j |M(k + k_j)| / max|M|.

    For the binary aperture this counts how many shifted passbands cover each
    frequency bin: 2 on the lens-shaped intersection of an overlapping pair,
    0 outside the synthetic aperture.
    """
    if len(k_estimates) == 0:
        raise ValidationError("step_size_alpha requires at least one estimate")
    m = np.abs(mask.mask)
    peak = m.max()
    if peak <= 0:
        raise ValidationError("mask has no support")
    acc = np.zeros_like(m)
    for kx, ky in k_estimates.shifts:
        acc += np.roll(m, (-int(ky), -int(kx)), axis=(0, 1))
    return acc / peak


def update_spectrum(
    o_hat: ComplexField,
    data_term: ComplexField,
    tv_term: ComplexField,
    phase_term: ComplexField,
    alpha_raster: np.ndarray,
    beta: float,
    gamma: float,
) -> ComplexField:
    """One descent step O <- O - alpha * data - beta * tv - gamma * phase."""
    for term in (data_term, tv_term, phase_term):
        if term.data.shape != o_hat.data.shape:
            raise ValidationError("update_spectrum: shape mismatch")
    if alpha_raster.shape != o_hat.data.shape:
        raise ValidationError("update_spectrum: alpha raster shape mismatch")
    new = (
        o_hat.data
        - alpha_raster * data_term.data
        - beta * tv_term.data
        - gamma * phase_term.data
    )
    return ComplexField(new, "frequency")


def annealed_radius(iteration: int, total: int, delta_max: int, delta_min: int) -> int:
    """Linear annealing of the search radius from delta_max down to delta_min."""
    if not 0 <= iteration < total:
        raise ValidationError(f"iteration {iteration} outside [0, {total})")
    if total == 1:
        return int(delta_max)
    value = delta_max + (delta_min - delta_max) * iteration / (total - 1)
    return _round_half_away(value)


class _SearchContext:
    """Precomputed geometry shared by every misfit search on one dataset.

    Holds the mask window, its bounding box, FFT sizes for the patch-based
    evaluation, and a cache of measurement spectra (the most expensive
    per-record quantity, reused across sweeps).
    """

    def __init__(self, mask: PupilMask, grid_size: int):
        self.mask = mask
        self.n = grid_size
        m = mask.mask
        ys, xs = np.nonzero(m > 0)
        if ys.size == 0:
            raise ValidationError("mask has no support")
        self.y0, self.x0 = int(ys.min()), int(xs.min())
        self.by = int(ys.max()) - self.y0 + 1
        self.bx = int(xs.max()) - self.x0 + 1
        self.window = np.ascontiguousarray(m[self.y0 : self.y0 + self.by, self.x0 : self.x0 + self.bx])
        # patch identity valid only when the linear autocorrelation fits unwrapped
        self.patch_ok = (2 * self.by - 1 <= grid_size) and (2 * self.bx - 1 <= grid_size)
        self.patch_fast = False
        if self.patch_ok:
            self.my = scipy.fft.next_fast_len(2 * self.by - 1)
            self.mx = scipy.fft.next_fast_len(2 * self.bx - 1)
            self.row_idx = (np.arange(-(self.by - 1), self.by) % self.my)[:, None]
            self.col_idx = (np.arange(-(self.bx - 1), self.bx) % self.mx)[None, :]
            self.patch_fast = self.my * self.mx <= (grid_size * grid_size) // 2
        self._spec_cache: dict[int, tuple[np.ndarray, float]] = {}

    def intensity_spectrum(self, intensity: np.ndarray, cache_key: int | None = None):
        """Centered unitary spectrum of a measurement, cropped to the patch,
        plus the constant misfit contribution from outside the patch."""
        if cache_key is not None and cache_key in self._spec_cache:
            return self._spec_cache[cache_key]
        spec = _fft2c(intensity.astype(np.complex128))
        c = self.n // 2
        ry, rx = self.by - 1, self.bx - 1
        patch = np.ascontiguousarray(spec[c - ry : c + ry + 1, c - rx : c + rx + 1])
        outside = float(np.sum(np.abs(spec) ** 2) - np.sum(np.abs(patch) ** 2))
        result = (patch, outside)
        if cache_key is not None:
            self._spec_cache[cache_key] = result
        return result


def _candidate_order(radius: int) -> np.ndarray:
    """All integer offsets in [-radius, radius]^2 sorted by the tie-break key
    (|delta|^2, delta_x, delta_y)."""
    rng = np.arange(-radius, radius + 1)
    dx, dy = np.meshgrid(rng, rng, indexing="xy")
    deltas = np.stack([dx.ravel(), dy.ravel()], axis=1)
    order = np.lexsort((deltas[:, 1], deltas[:, 0], np.sum(deltas**2, axis=1)))
    return deltas[order]


def _misfits_patch(
    ctx: _SearchContext,
    o_hat: np.ndarray,
    candidates: np.ndarray,
    target_patch: np.ndarray,
    outside: float,
) -> np.ndarray:
    """Misfit of every candidate shift via the bandlimited patch identity."""
    n = ctx.n
    # rolled-spectrum window under the mask; wraps at the extreme legal shifts
    rows = (ctx.y0 - candidates[:, 1][:, None] + np.arange(ctx.by)[None, :]) % n
    cols = (ctx.x0 - candidates[:, 0][:, None] + np.arange(ctx.bx)[None, :]) % n
    stack = o_hat[rows[:, :, None], cols[:, None, :]] * ctx.window
    padded = np.zeros((len(candidates), ctx.my, ctx.mx), dtype=np.complex128)
    padded[:, : ctx.by, : ctx.bx] = stack
    spec = scipy.fft.fft2(padded, axes=(1, 2))
    acf = scipy.fft.ifft2(np.abs(spec) ** 2, axes=(1, 2))
    patches = np.ascontiguousarray(acf[:, ctx.row_idx, ctx.col_idx] / n)
    return kernels.sse_diff_stack(patches, target_patch) + outside


def _misfits_direct(
    ctx: _SearchContext, o_hat: np.ndarray, candidates: np.ndarray, intensity: np.ndarray
) -> np.ndarray:
    out = np.empty(len(candidates))
    m = ctx.mask.mask
    for i, (kx, ky) in enumerate(candidates):
        shifted = np.roll(o_hat, (int(ky), int(kx)), axis=(0, 1))
        psi = _ifft2c(shifted * m)
        out[i] = kernels.intensity_sse(np.ascontiguousarray(psi), intensity)
    return out


def _evaluate_candidates(
    ctx: _SearchContext,
    o_hat: np.ndarray,
    intensity: np.ndarray,
    candidates: np.ndarray,
    cache_key: int | None = None,
) -> tuple[int, int]:
    """Misfit-minimizing shift among pre-sorted on-grid candidates.

    Candidates must already be ordered by the tie-break key, so the first
    occurrence of the minimum realizes (misfit, |delta|^2, dx, dy) ordering.
    """
    if ctx.patch_fast:
        target_patch, outside = ctx.intensity_spectrum(intensity, cache_key)
        misfits = _misfits_patch(ctx, o_hat, candidates, target_patch, outside)
    else:
        misfits = _misfits_direct(ctx, o_hat, candidates, intensity)
    best = int(np.argmin(misfits))
    return int(candidates[best, 0]), int(candidates[best, 1])


def _search_one(
    ctx: _SearchContext,
    o_hat: np.ndarray,
    intensity: np.ndarray,
    k_hat: tuple[int, int],
    radius: int,
    cache_key: int | None = None,
) -> tuple[int, int]:
    if radius == 0:
        return k_hat
    deltas = _candidate_order(int(radius))
    candidates = deltas + np.array(k_hat, dtype=np.int64)
    bound = _effective_bound(ctx.n, ctx.mask.radius)
    keep = (np.abs(candidates[:, 0]) <= bound) & (np.abs(candidates[:, 1]) <= bound)
    candidates = candidates[keep]
    if len(candidates) == 0:
        return k_hat
    return _evaluate_candidates(ctx, o_hat, intensity, candidates, cache_key)


def local_k_search(
    o_hat: ComplexField,
    mask: PupilMask,
    intensity: np.ndarray,
    k_hat: WaveVector,
    radius: int,
) -> WaveVector:
    """Exhaustive integer search for the shift that best explains one record.

    Evaluates || |inverse-DFT(O(k - k_hat - delta) M)|^2 - I ||^2 for every
    integer offset with |delta_x|, |delta_y| <= radius, skipping candidates
    that would push the aperture off the grid.  Ties are broken by smallest
    |delta|, then lexicographic (delta_x, delta_y); radius 0 returns the
    input unchanged.
    """
    if radius < 0:
        raise ValidationError(f"radius must be >= 0, got {radius}")
    if o_hat.domain != "frequency":
        raise ValidationError("local_k_search expects a frequency-domain estimate")
    kx, ky = k_hat.as_ints()
    if radius == 0:
        return WaveVector(kx, ky)
    ctx = _SearchContext(mask, o_hat.grid_size)
    bx, by = _search_one(ctx, o_hat.data, np.ascontiguousarray(intensity, np.float64), (kx, ky), radius)
    return WaveVector(bx, by)


def _pick_center_record(shifts: np.ndarray) -> int:
    keys = [(int(kx * kx + ky * ky), int(kx), int(ky), i) for i, (kx, ky) in enumerate(shifts)]
    return min(keys)[3]


def reconstruct(
    ms: MeasurementSet,
    init_k: KSpaceEstimate,
    params: SolverParams | None = None,
    initial_spectrum: ComplexField | None = None,
) -> ReconstructionResult:
    """Run the full alternating reconstruction on one measurement set.

    Every sweep projects all records from the current spectrum snapshot,
    enforces the image-plane modulus, and applies one batch update built from
    the data correction, TV gradient, and phase gradient.  Every
    ``params.search_every``-th sweep ends with a per-record local k-search at
    the annealed radius.  The loss trace records the data misfit, smoothed TV
    value, and phase penalty of each sweep's starting estimate.

    ``initial_spectrum`` overrides the default seed (the measurement nearest
    k = (0, 0), via :func:`initialize_object`).

    When ``params.use_pupil_constraint`` is set, each sweep additionally
    replaces the spectrum modulus with the measured pupil amplitude inside
    each record's informed disk (sequentially, in record order).  The default
    pipeline omits this step.
    """
    params = params or SolverParams()
    n_rec = len(ms.records)
    if len(init_k) != n_rec:
        raise ValidationError(f"init_k has {len(init_k)} shifts for {n_rec} records")
    n = ms.config.grid_size
    mask = ms.pupil_mask()
    bound = _effective_bound(n, mask.radius)
    for kx, ky in init_k.shifts:
        if abs(kx) > bound or abs(ky) > bound:
            raise ValidationError(f"initial shift ({kx}, {ky}) violates |k| <= {bound}")

    m = mask.mask
    eps = params.epsilon
    k_current = init_k.shifts.copy()
    sqrt_i = [np.ascontiguousarray(np.sqrt(rec.image)) for rec in ms.records]
    intensities = [np.ascontiguousarray(rec.image, dtype=np.float64) for rec in ms.records]
    ctx = _SearchContext(mask, n)

    if initial_spectrum is not None:
        if initial_spectrum.domain != "frequency" or initial_spectrum.grid_size != n:
            raise ValidationError("initial_spectrum must be a frequency-domain N x N field")
        o_hat = initial_spectrum.data.copy()
    else:
        o_hat = initialize_object(ms, record_index=_pick_center_record(k_current)).data

    coverage = None  # sum of shifted apertures, rebuilt whenever k changes
    trace_data = np.zeros(params.iterations)
    trace_tv = np.zeros(params.iterations)
    trace_phase = np.zeros(params.iterations)

    for it in range(params.iterations):
        if coverage is None:
            coverage = np.zeros((n, n))
            for kx, ky in k_current:
                coverage += np.roll(m, (-int(ky), -int(kx)), axis=(0, 1))

        numerator = np.zeros((n, n), dtype=np.complex128)
        loss_data = 0.0
        for j in range(n_rec):
            kx, ky = int(k_current[j, 0]), int(k_current[j, 1])
            shifted = np.roll(o_hat, (ky, kx), axis=(0, 1))
            psi = _ifft2c(shifted * m)
            psi = np.ascontiguousarray(psi)
            loss_data += kernels.intensity_sse(psi, intensities[j])
            constrained = kernels.amplitude_constraint(psi, sqrt_i[j], eps)
            big_psi = _fft2c(constrained)
            numerator += np.roll(m * (shifted - big_psi), (-ky, -kx), axis=(0, 1))

        o_spatial = _ifft2c(o_hat)
        tv_g, loss_tv = _tv_terms(o_spatial, eps)
        phase_g, loss_phase = _phase_terms(o_spatial, eps)
        trace_data[it] = loss_data
        trace_tv[it] = loss_tv
        trace_phase[it] = loss_phase

        # Data step: summed masked residuals normalized by the per-pixel
        # aperture-coverage count (the diagonal of the data-term curvature),
        # i.e. the multiplexed-FP object update with a binary pupil.  Scaling
        # by the raw count instead over-relaxes wherever more than two
        # apertures overlap and blows up on dense grids.  The regularizer
        # steps are damped by the peak count so beta and gamma keep their
        # meaning as weights relative to a unit-size data step.
        o_hat = o_hat - numerator / (coverage + eps) - (
            params.beta * _fft2c(tv_g) + params.gamma * _fft2c(phase_g)
        ) / coverage.max()

        if params.use_pupil_constraint:
            for j in range(n_rec):
                kx, ky = int(k_current[j, 0]), int(k_current[j, 1])
                disk = np.roll(m, (ky, kx), axis=(0, 1)) > 0
                constrained = kernels.amplitude_constraint(
                    np.ascontiguousarray(o_hat),
                    np.ascontiguousarray(np.sqrt(ms.records[j].pupil)),
                    eps,
                )
                o_hat = np.where(disk, constrained, o_hat)

        if (it + 1) % params.search_every == 0 and params.delta_max > 0:
            radius = annealed_radius(it, params.iterations, params.delta_max, params.delta_min)
            changed = False
            for j in range(n_rec):
                new_k = _search_one(
                    ctx,
                    o_hat,
                    intensities[j],
                    (int(k_current[j, 0]), int(k_current[j, 1])),
                    radius,
                    cache_key=j,
                )
                if new_k != (int(k_current[j, 0]), int(k_current[j, 1])):
                    k_current[j] = new_k
                    changed = True
            if changed:
                coverage = None

    spectrum = ComplexField(o_hat, "frequency")
    return result_from_spectrum(
        spectrum,
        initial_k=KSpaceEstimate(init_k.shifts.copy(), init_k.provenance, list(init_k.warnings)),
        corrected_k=KSpaceEstimate(k_current, "corrected"),
        loss_trace={"data": trace_data, "tv": trace_tv, "phase": trace_phase},
        params=params,
    )
