"""Complex-valued basis pursuit denoising for tomographic spectral estimation.

Core pieces: an irregular Fourier steering dictionary (`model`), proximal
machinery (`prox`), randomized blockwise and full-vector solvers (`solver`),
the three-stage scatterer estimation pipeline (`slimmer`), simulation and
Monte Carlo harnesses (`simulate`), plus a stack file format (`stack`) and
an experiment CLI (`cli`).
"""

from .exceptions import (
    CapacityError,
    ConfigurationError,
    EstimationError,
    GeometryError,
    GridError,
    LineSearchError,
    NumericalError,
    StackFormatError,
    TomoError,
)
from .model import (
    AcquisitionGeometry,
    ParameterGrid,
    SteeringMatrix,
    build_steering_matrix,
    load_geometry,
    normalized_distance,
    rayleigh_resolution,
    save_geometry,
    spatial_frequencies,
    steering_column,
    temporal_frequencies,
)
from .prox import (
    Objective,
    backtrack,
    default_lambda,
    eval_F,
    eval_f,
    grad_f,
    line_search_ok,
    prox_step,
    soft_threshold,
)
from .simulate import (
    DetectionResult,
    MonteCarloSetup,
    Scatterer,
    Scenario,
    demo_geometry,
    detection_criterion,
    monte_carlo_detection,
    synthesize_pixel,
    wilson_interval,
)
from .slimmer import (
    PipelineConfig,
    ScattererEstimates,
    build_objective,
    detect_support,
    estimate_params,
    model_select,
    slimmer_pipeline,
)
from .solver import (
    BlockPartition,
    Solution,
    SolverConfig,
    SolverStatus,
    block_partition,
    fista_solve,
    ista_solve,
    rbpg_solve,
    sample_block,
    spectral_sq_norm,
    svd_wiener_solve,
)

__version__ = "0.1.0"
