"""Spectral-space diffusion refinement for time-dependent PDE surrogates."""

from .spectral import (
    FrequencyScaling,
    Grid,
    PowerSpectrum,
    RealField,
    SpectralField,
    dft_forward,
    dft_inverse,
    power_spectrum,
    sample_spectral_noise,
    scaling_vector,
)
from .schedules import (
    RefinementSchedule,
    StepCoefficients,
    blur_at,
    dr2_dphi_at,
    make_schedule,
    radius_at,
    step_coefficients,
    tau_at,
)
from .refiner import (
    OracleVelocityPredictor,
    TrainingPair,
    forward_noise,
    make_training_pairs,
    posterior_step,
    reconstruct_x,
    refine_step,
    v_target,
)
from .solvers import (
    BlowUpError,
    KsParams,
    NsParams,
    Trajectory,
    dataset_split,
    read_trajectory,
    simulate_ks,
    simulate_ns,
    write_trajectory,
)
from .surrogate import (
    PerModeLinearPredictor,
    fit_least_squares,
    load_model,
    save_model,
)
from .evaluate import (
    MetricsReport,
    SpectrumComparison,
    correlation_time,
    one_step_mse,
    rollout,
    spectrum_compare,
    unrolled_mse,
)

__version__ = "0.1.0"
