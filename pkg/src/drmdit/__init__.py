"""drmdit: robust-Mahalanobis / information-theoretic autoencoder for
two-sided (near and far) anomaly detection."""

from .data import FeatureMatrix, SynthSpec
from .detect import ScoreBand, ScoreReport
from .errors import (DataError, DegeneracyError, DrmditError, ParameterError,
                     TrainingError)
from .robust import ClassicalStats, RobustLatentStats
from .train import LossBreakdown, LossWeights, TrainConfig, TrainedModel

__version__ = "0.1.0"

__all__ = [
    "FeatureMatrix", "SynthSpec", "ScoreBand", "ScoreReport",
    "ClassicalStats", "RobustLatentStats",
    "LossBreakdown", "LossWeights", "TrainConfig", "TrainedModel",
    "DrmditError", "ParameterError", "DataError", "DegeneracyError",
    "TrainingError", "__version__",
]
