"""Feature-space fusion of whole-image and patch-mean embeddings for
few-shot episodic evaluation, with a synthetic Gaussian oracle validating
the fusion mathematics."""

from .classifier import (
    Prototype,
    classify,
    closure_prototype,
    fused_prototype,
    nll,
    totality_prototype,
)
from .episodes import Episode, EpisodeSpec, episode_at, sample_episode, sample_groups, subseed_rng
from .errors import (
    CapacityError,
    ConfigError,
    DataError,
    DegenerateObserverError,
    GestaltEvalError,
    GgfsFormatError,
)
from .estimator import (
    CovarianceDiag,
    FusionConfig,
    LambdaDiag,
    closure_estimate,
    estimate_feature,
    fuse,
    optimal_lambda,
    totality_estimate,
)
from .harness import EvalReport, ablate, run_eval, sweep_lambda, sweep_patches, variance_report
from .oracle import (
    ErrorDiagnostics,
    GaussianImageModel,
    empirical_error_diagnostics,
    generate_dataset,
    grid_search_lambda,
    intra_class_variance,
)
from .store import (
    EmbeddingDataset,
    ImageRecord,
    read_dataset,
    read_dataset_jsonl,
    subsample_patches,
    write_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "ConfigError",
    "CovarianceDiag",
    "DataError",
    "DegenerateObserverError",
    "EmbeddingDataset",
    "Episode",
    "EpisodeSpec",
    "ErrorDiagnostics",
    "EvalReport",
    "FusionConfig",
    "GaussianImageModel",
    "GestaltEvalError",
    "GgfsFormatError",
    "ImageRecord",
    "LambdaDiag",
    "Prototype",
    "ablate",
    "classify",
    "closure_estimate",
    "closure_prototype",
    "empirical_error_diagnostics",
    "episode_at",
    "estimate_feature",
    "fuse",
    "fused_prototype",
    "generate_dataset",
    "grid_search_lambda",
    "intra_class_variance",
    "nll",
    "optimal_lambda",
    "read_dataset",
    "read_dataset_jsonl",
    "run_eval",
    "sample_episode",
    "sample_groups",
    "subsample_patches",
    "subseed_rng",
    "sweep_lambda",
    "sweep_patches",
    "totality_estimate",
    "totality_prototype",
    "variance_report",
    "write_dataset",
]
