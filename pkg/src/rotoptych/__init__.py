"""Rotation-diversity Fourier ptychography: simulate dual-plane intensity
measurements of a tilting target and reconstruct its complex spectrum with
joint k-shift self-calibration."""

from ._backend import BACKEND
from .optics import (
    ComplexField,
    OpticalConfig,
    PupilMask,
    RotationAngle,
    ValidationError,
    WaveVector,
    fft_centered,
    ifft_centered,
    make_circular_mask,
    pixel_shift_to_rotation,
    rotation_to_pixel_shift,
    simulate_image_intensity,
    simulate_pupil_intensity,
)
from .sim import (
    AngleGrid,
    MeasurementRecord,
    MeasurementSet,
    NoiseSpec,
    add_noise,
    build_complex_target,
    generate_rotation_grid,
    synthesize_dataset,
)
from .solver import (
    KSpaceEstimate,
    ReconstructionResult,
    SolverParams,
    annealed_radius,
    apply_image_constraint,
    apply_pupil_constraint,
    data_update,
    image_projection,
    initialize_object,
    local_k_search,
    phase_gradient,
    reconstruct,
    step_size_alpha,
    tv_gradient,
    update_spectrum,
)
from .initializers import (
    coarse_misfit_init,
    ground_truth_init,
    initializer_by_name,
    load_predictions,
    pupil_support_init,
    save_predictions,
)
from .metrics import (
    EvalReport,
    amplitude_rmse,
    evaluate,
    k_rmse,
    overlap_fraction,
    overlap_fraction_pixels,
    per_record_k_error,
    phase_rmse_offset_corrected,
)
from .dataset import load_dataset, load_result, save_dataset, save_result

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ComplexField",
    "OpticalConfig",
    "PupilMask",
    "RotationAngle",
    "ValidationError",
    "WaveVector",
    "fft_centered",
    "ifft_centered",
    "make_circular_mask",
    "pixel_shift_to_rotation",
    "rotation_to_pixel_shift",
    "simulate_image_intensity",
    "simulate_pupil_intensity",
    "AngleGrid",
    "MeasurementRecord",
    "MeasurementSet",
    "NoiseSpec",
    "add_noise",
    "build_complex_target",
    "generate_rotation_grid",
    "synthesize_dataset",
    "KSpaceEstimate",
    "ReconstructionResult",
    "SolverParams",
    "annealed_radius",
    "apply_image_constraint",
    "apply_pupil_constraint",
    "data_update",
    "image_projection",
    "initialize_object",
    "local_k_search",
    "phase_gradient",
    "reconstruct",
    "step_size_alpha",
    "tv_gradient",
    "update_spectrum",
    "coarse_misfit_init",
    "ground_truth_init",
    "initializer_by_name",
    "load_predictions",
    "pupil_support_init",
    "save_predictions",
    "EvalReport",
    "amplitude_rmse",
    "evaluate",
    "k_rmse",
    "overlap_fraction",
    "overlap_fraction_pixels",
    "per_record_k_error",
    "phase_rmse_offset_corrected",
    "load_dataset",
    "load_result",
    "save_dataset",
    "save_result",
    "__version__",
]
