"""Model-level pruning: propagate sparse activations layer by layer.

In adaptive mode every layer is pruned against the activations produced by
the already-pruned layers before it, after replacing its dense weight with
the least-squares solution that maps those perturbed activations back onto
the original dense outputs. Layers flagged non-prunable are recalibrated
the same way but keep all their weights. Independent mode prunes every
layer against its original dense input with no recalibration, which leaves
upstream error uncorrected and serves as the baseline.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError
from .hessian import DEFAULT_DAMPING
from .linalg import as_matrix, as_vector, least_squares
from .pruner import SparsityTarget, prune_layer

ACTIVATIONS = {
    "identity": lambda y: y,
    "relu": lambda y: np.maximum(y, 0.0),
    "tanh": np.tanh,
}


@dataclass
class Layer:
    """One affine layer: out = activation(weight @ x + bias)."""

    weight: np.ndarray
    bias: np.ndarray | None = None
    activation: str = "identity"
    prunable: bool = True

    def __post_init__(self):
        self.weight = as_matrix(self.weight, "weight")
        if self.bias is not None:
            self.bias = as_vector(self.bias, "bias")
            if self.bias.size != self.weight.shape[0]:
                raise ShapeError(
                    f"bias has {self.bias.size} entries for {self.weight.shape[0]} outputs"
                )
        if self.activation not in ACTIVATIONS:
            raise ValueError(
                f"unknown activation {self.activation!r}; expected one of "
                f"{sorted(ACTIVATIONS)}"
            )

    @property
    def d_out(self) -> int:
        return self.weight.shape[0]

    @property
    def d_in(self) -> int:
        return self.weight.shape[1]


@dataclass
class Checkpoint:
    """An ordered stack of layers plus free-form metadata."""

    layers: list[Layer]
    name: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.layers:
            raise ValueError("checkpoint needs at least one layer")
        for i in range(len(self.layers) - 1):
            if self.layers[i].d_out != self.layers[i + 1].d_in:
                raise ShapeError(
                    f"layer {i} emits {self.layers[i].d_out} values but layer "
                    f"{i + 1} expects {self.layers[i + 1].d_in}"
                )


@dataclass(frozen=True)
class LayerRecord:
    """Per-layer pruning record.

    ``mse_before_recalibration`` measures the stale dense weight against the
    original dense outputs on this layer's (possibly perturbed) input;
    ``mse_after_pruning`` measures the pruned weight against the dense
    reference weight on the same input.
    """

    layer: int
    sparsity: float
    mse_before_recalibration: float
    mse_after_pruning: float
    step_loss_sum: float
    seconds: float


@dataclass(frozen=True)
class PruneReport:
    layers: tuple[LayerRecord, ...]
    final_output_mse: float


def post_process(y, layer: Layer) -> np.ndarray:
    """Add the layer bias, then apply its elementwise activation."""
    y = as_matrix(y, "pre-activation")
    if y.shape[0] != layer.d_out:
        raise ShapeError(f"pre-activation has {y.shape[0]} rows, layer emits {layer.d_out}")
    if layer.bias is not None:
        y = y + layer.bias[:, None]
    return ACTIVATIONS[layer.activation](y)


def forward_dense(ckpt: Checkpoint, x) -> list[tuple[np.ndarray, np.ndarray]]:
    """Run the dense model, returning (pre-activation, post-activation) per layer.

    The pre-activation is the bare matrix product weight @ x; bias and
    activation are applied by ``post_process`` to form the next layer's
    input.
    """
    x = as_matrix(x, "input")
    if x.shape[0] != ckpt.layers[0].d_in:
        raise ShapeError(
            f"input has {x.shape[0]} rows but the first layer expects "
            f"{ckpt.layers[0].d_in}"
        )
    out = []
    for layer in ckpt.layers:
        y = layer.weight @ x
        x = post_process(y, layer)
        out.append((y, x))
    return out


def recalibrate_weights(xhat, y_dense, damping: float, with_bias: bool = False):
    """Least-squares weights mapping perturbed inputs onto dense outputs.

    Solves w @ xhat ~ y_dense; with ``with_bias`` the intercept is solved
    jointly by augmenting ``xhat`` with a row of ones, and the result is a
    (weights, bias) pair. Without it the bias slot is None.
    """
    xhat = as_matrix(xhat, "inputs")
    y_dense = as_matrix(y_dense, "dense targets")
    if with_bias:
        aug = np.vstack([xhat, np.ones((1, xhat.shape[1]))])
        sol = least_squares(aug, y_dense, damping)
        return np.ascontiguousarray(sol[:, :-1]), sol[:, -1].copy()
    return least_squares(xhat, y_dense, damping), None


def weight_sparsity(ckpt: Checkpoint) -> float:
    """Fraction of exactly-zero entries across all layer weights."""
    zeros = sum(int(np.count_nonzero(layer.weight == 0.0)) for layer in ckpt.layers)
    total = sum(layer.weight.size for layer in ckpt.layers)
    return zeros / total


def _broadcast_targets(targets, n_layers: int) -> list[SparsityTarget]:
    if isinstance(targets, SparsityTarget):
        return [targets] * n_layers
    targets = list(targets)
    if len(targets) != n_layers:
        raise ValueError(f"got {len(targets)} targets for {n_layers} layers")
    return targets


def _is_noop(target: SparsityTarget, d_in: int) -> bool:
    return target.mode == "unstructured" and int(d_in * target.s) == 0


def prune_model(
    ckpt: Checkpoint,
    calibration,
    targets,
    damping: float = DEFAULT_DAMPING,
    adaptive: bool = True,
) -> tuple[Checkpoint, PruneReport]:
    """Prune a whole checkpoint against calibration data.

    ``targets`` is one SparsityTarget per layer, or a single target applied
    to every layer. Non-prunable layers are never pruned; in adaptive mode
    they are still recalibrated so their dense output tracks the perturbed
    input. Layer 0 sees unperturbed inputs and is never recalibrated.

    Returns the sparse checkpoint and a report with one record per layer
    plus the final-output MSE between the dense and sparse models on the
    calibration data. The computation is sequential and deterministic.
    """
    calibration = as_matrix(calibration, "calibration")
    target_list = _broadcast_targets(targets, len(ckpt.layers))
    widest = max(layer.d_in for layer in ckpt.layers)
    if calibration.shape[1] < widest:
        warnings.warn(
            f"{calibration.shape[1]} calibration columns for a widest layer input "
            f"of {widest}; hessians are rank-deficient and lean on the damping",
            RuntimeWarning,
            stacklevel=2,
        )

    dense_pairs = forward_dense(ckpt, calibration)
    dense_inputs = [calibration] + [post for _, post in dense_pairs[:-1]]

    x_hat = calibration
    new_layers: list[Layer] = []
    records: list[LayerRecord] = []
    for idx, (layer, target) in enumerate(zip(ckpt.layers, target_list)):
        t0 = time.perf_counter()
        y_dense = dense_pairs[idx][0]
        x_in = x_hat if adaptive else dense_inputs[idx]
        mse_before = float(np.mean((layer.weight @ x_in - y_dense) ** 2))

        if adaptive and idx > 0:
            if layer.bias is not None:
                affine_target = y_dense + layer.bias[:, None]
                w_ref, b_ref = recalibrate_weights(x_in, affine_target, damping, with_bias=True)
            else:
                w_ref, b_ref = recalibrate_weights(x_in, y_dense, damping, with_bias=False)
        else:
            w_ref = layer.weight
            b_ref = None if layer.bias is None else layer.bias.copy()

        if layer.prunable and not _is_noop(target, layer.d_in):
            w_new, stats = prune_layer(w_ref, x_in, target, damping)
        else:
            w_new = w_ref.copy()
            stats = None

        new_layer = Layer(
            weight=w_new, bias=b_ref, activation=layer.activation, prunable=layer.prunable
        )
        new_layers.append(new_layer)
        if adaptive:
            x_hat = post_process(w_new @ x_hat, new_layer)

        records.append(
            LayerRecord(
                layer=idx,
                sparsity=stats.sparsity if stats else 0.0,
                mse_before_recalibration=mse_before,
                mse_after_pruning=stats.mse if stats else 0.0,
                step_loss_sum=stats.step_loss_sum if stats else 0.0,
                seconds=time.perf_counter() - t0,
            )
        )

    sparse = Checkpoint(layers=new_layers, name=ckpt.name, metadata=dict(ckpt.metadata))
    sparse.metadata["sparsity"] = weight_sparsity(sparse)
    sparse.metadata["adaptive"] = adaptive
    final_sparse = forward_dense(sparse, calibration)[-1][1]
    final_dense = dense_pairs[-1][1]
    final_output_mse = float(np.mean((final_dense - final_sparse) ** 2))
    return sparse, PruneReport(layers=tuple(records), final_output_mse=final_output_mse)
