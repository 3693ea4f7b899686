"""Remote anomaly detection over noisy channels.

Simulation library comparing coded (quantize-and-code) and uncoded
(analog spreading) transmission of feature vectors for remote anomaly
detection, with a PCA subspace detector (including closed-form error
probabilities) and a small autoencoder detector.
"""

__version__ = "0.1.0"

from remotad.errors import (
    ConfigError,
    ContractViolation,
    DegenerateParameterError,
    DimensionError,
    DomainError,
    RemotadError,
    TrainingDivergedError,
    UnsupportedAnalyticError,
)
from remotad.numerics import RngStream
from remotad.source import FaultSpec, SourceSpec, paper_spectrum, rotate_spec
from remotad.transmission import (
    BitAllocation,
    ChannelParams,
    CodedScheme,
    ScalarQuantizer,
    UncodedScheme,
    allocate_bits,
    capacity_bits,
    design_quantizer,
)
from remotad.pca import PcaDetector, QuadFormParams
from remotad.autoencoder import Autoencoder, MlpSpec, TrainConfig
from remotad.config import ExperimentConfig
from remotad.evaluation import ScoredDataset, SweepResult, best_accuracy

__all__ = [
    "__version__",
    "RemotadError", "ConfigError", "ContractViolation",
    "DegenerateParameterError", "DimensionError", "DomainError",
    "TrainingDivergedError", "UnsupportedAnalyticError",
    "RngStream",
    "SourceSpec", "FaultSpec", "paper_spectrum", "rotate_spec",
    "ChannelParams", "BitAllocation", "ScalarQuantizer", "CodedScheme",
    "UncodedScheme", "allocate_bits", "capacity_bits", "design_quantizer",
    "PcaDetector", "QuadFormParams",
    "Autoencoder", "MlpSpec", "TrainConfig",
    "ExperimentConfig",
    "ScoredDataset", "SweepResult", "best_accuracy",
]
