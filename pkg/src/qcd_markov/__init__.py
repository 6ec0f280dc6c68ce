"""Bayesian quickest change detection for finite-state Markov chains."""

__version__ = "0.1.0"

from .chain import (
    StructureReport,
    TransitionMatrix,
    relative_entropy_rate,
    sample_step,
    stationary,
    structure,
    validate_matrix,
)
from .detect import (
    Decision,
    DetectionResult,
    DetectorConfig,
    OnlineDetector,
    RiskEstimate,
    detector_step,
    estimate_risk,
    run_detection,
    sweep_thresholds,
)
from .diagnostics import (
    DriftEstimate,
    SeparationReport,
    StudyResult,
    critical_parameter,
    estimate_drift,
    separation_report,
    supermartingale_study,
    symmetric_family,
)
from .filtering import (
    AugmentedPosterior,
    PosteriorState,
    hmm_filter_step,
    run_filter,
    scalar_filter_step,
)
from .model import (
    AugmentedModel,
    ChangePointModel,
    GeometricPrior,
    Trajectory,
    build_augmented,
    sample_change_time,
    simulate,
)
