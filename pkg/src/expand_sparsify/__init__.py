"""Expand-and-sparsify: random expansion, sparsification and region-mean readouts."""

from .approximator import EasApproximator, evaluate, fit_readout, predict, predict_batch, prune_dead
from .data import (Dataset, ManifoldSpec, load_csv, make_classification, make_regression, make_target,
                   sample_manifold, save_csv, scramble_labels)
from .estimators import EasClassifier, EasRegressor, ExpandSparsify, default_k
from .exceptions import (CalibrationError, ChecksumError, ConfigurationError, DataError, ExpandSparsifyError,
                         FitError, IngestionError, InputError, ModelFileError, NoActiveUnitsError, ShapeError,
                         VersionError)
from .experiments import ExperimentConfig, run_experiment
from .metrics import OverlapProfile, adversarial_probe, code_overlap, similarity_profile
from .persistence import load_model, save_model
from .projection import ProjectionMatrix, pairwise_coherence, project, project_batch, sample_projection
from .sparsify import (SparseCode, SparsifyConfig, ThresholdVector, estimate_thresholds, measure_sparsity,
                       sparsify_binary, sparsify_relu, sparsify_topk)

__version__ = "0.1.0"
