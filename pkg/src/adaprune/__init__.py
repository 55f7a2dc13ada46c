"""Post-training layer-wise pruning for dense MLP checkpoints.

Core pieces: hessian-guided per-row weight removal with survivor
compensation, adaptive propagation of sparse activations with
least-squares recalibration of dense weights, N:M structured sparsity,
greedy weight averaging of candidate models, and a toy text-classifier
robustness harness with a binary archive format and a CLI.
"""

from .archive import MAGIC, load_archive, load_tensors, save_archive, save_tensors
from .attack import RobustnessResult, attack_example, evaluate_robustness, result_from_counts
from .dataset import ToyDataset, load_dataset, save_dataset, synthetic_dataset
from .errors import (
    AdapruneError,
    ArchiveError,
    DatasetError,
    NumericalError,
    ShapeError,
    SingularMatrixError,
    SoupEvalError,
)
from .hessian import (
    DEFAULT_DAMPING,
    PIVOT_FLOOR,
    HessianState,
    build_hessian,
    init_state,
    remove_index,
)
from .linalg import Dims, as_matrix, as_vector, damped_inverse, least_squares, matmul
from .pipeline import (
    ACTIVATIONS,
    Checkpoint,
    Layer,
    LayerRecord,
    PruneReport,
    forward_dense,
    post_process,
    prune_model,
    recalibrate_weights,
    weight_sparsity,
)
from .pruner import (
    LayerPruneStats,
    RowTrajectory,
    SparsityTarget,
    apply_removal,
    prune_layer,
    prune_row,
    select_prune_index,
)
from .soup import SoupCandidate, average, greedy_weight_average
from .textmodel import classify, clean_accuracy, featurize, score_features, train_toy

__version__ = "0.1.0"

__all__ = [
    "ACTIVATIONS",
    "AdapruneError",
    "ArchiveError",
    "Checkpoint",
    "DEFAULT_DAMPING",
    "DatasetError",
    "Dims",
    "HessianState",
    "Layer",
    "LayerPruneStats",
    "LayerRecord",
    "MAGIC",
    "NumericalError",
    "PIVOT_FLOOR",
    "PruneReport",
    "RobustnessResult",
    "RowTrajectory",
    "ShapeError",
    "SingularMatrixError",
    "SoupCandidate",
    "SoupEvalError",
    "SparsityTarget",
    "ToyDataset",
    "apply_removal",
    "as_matrix",
    "as_vector",
    "attack_example",
    "average",
    "build_hessian",
    "classify",
    "clean_accuracy",
    "damped_inverse",
    "evaluate_robustness",
    "featurize",
    "forward_dense",
    "greedy_weight_average",
    "init_state",
    "least_squares",
    "load_archive",
    "load_dataset",
    "load_tensors",
    "matmul",
    "post_process",
    "prune_layer",
    "prune_model",
    "prune_row",
    "recalibrate_weights",
    "remove_index",
    "result_from_counts",
    "save_archive",
    "save_dataset",
    "save_tensors",
    "score_features",
    "select_prune_index",
    "synthetic_dataset",
    "train_toy",
    "weight_sparsity",
]
