"""Bag-of-embeddings text classifier: inference and a tiny trainer.

A sentence is featurized as the mean of its token embedding rows and fed
through an MLP checkpoint. The trainer runs full-batch gradient descent on
the softmax cross-entropy and exists to produce candidate models for
averaging and pruning demos; it makes no attempt at being fast.
"""

from __future__ import annotations

import numpy as np

from .dataset import ToyDataset
from .errors import NumericalError
from .linalg import as_matrix
from .pipeline import Checkpoint, Layer, post_process


def featurize(embedding, tokens) -> np.ndarray:
    """Mean of the token embedding rows; order and multiplicity average out."""
    embedding = as_matrix(embedding, "embedding")
    tokens = [int(t) for t in tokens]
    if not tokens:
        raise ValueError("cannot featurize an empty token sequence")
    if any(t < 0 or t >= embedding.shape[0] for t in tokens):
        raise IndexError("token id outside the embedding table")
    return embedding[tokens].mean(axis=0)


def score_features(model: Checkpoint, features: np.ndarray) -> np.ndarray:
    """Forward one feature vector, returning the final-layer output scores."""
    x = np.asarray(features, dtype=np.float64).reshape(-1, 1)
    for layer in model.layers:
        x = post_process(layer.weight @ x, layer)
    return x[:, 0].copy()


def classify(model: Checkpoint, embedding, tokens) -> tuple[int, np.ndarray]:
    """Predict a label for a token sequence.

    Returns (label, scores); ties resolve to the lowest label index.
    """
    scores = score_features(model, featurize(embedding, tokens))
    return int(np.argmax(scores)), scores


def clean_accuracy(model: Checkpoint, ds: ToyDataset) -> float:
    """Percentage of examples the model labels correctly, no attack."""
    if not ds.examples:
        raise ValueError("dataset is empty")
    correct = sum(
        1 for tokens, label in ds.examples
        if classify(model, ds.embedding, tokens)[0] == label
    )
    return 100.0 * correct / len(ds.examples)


def _softmax_columns(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=0, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=0, keepdims=True)


def train_toy(
    ds: ToyDataset,
    widths,
    epochs: int,
    learning_rate: float,
    seed: int,
) -> Checkpoint:
    """Train an MLP classifier with full-batch gradient descent.

    ``widths`` is the complete width sequence: it must start at the
    embedding dimension and end at the label count. Hidden layers use relu;
    the output layer is an identity-activation head flagged non-prunable.
    Training is deterministic for a fixed seed, and the final checkpoint is
    returned regardless of the loss it reached.
    """
    widths = [int(w) for w in widths]
    d_embed = ds.embedding.shape[1]
    if len(widths) < 2:
        raise ValueError("need at least an input and an output width")
    if widths[0] != d_embed:
        raise ValueError(f"widths start at {widths[0]} but embeddings have {d_embed} dims")
    if widths[-1] != ds.num_labels:
        raise ValueError(f"widths end at {widths[-1]} but there are {ds.num_labels} labels")
    if not ds.examples:
        raise ValueError("dataset is empty")

    rng = np.random.default_rng(seed)
    weights = [
        rng.normal(0.0, np.sqrt(2.0 / widths[i]), size=(widths[i + 1], widths[i]))
        for i in range(len(widths) - 1)
    ]
    biases = [np.zeros(widths[i + 1]) for i in range(len(widths) - 1)]
    n_layers = len(weights)

    x = np.column_stack([featurize(ds.embedding, tokens) for tokens, _ in ds.examples])
    labels = np.array([label for _, label in ds.examples], dtype=int)
    m = x.shape[1]
    onehot = np.zeros((ds.num_labels, m))
    onehot[labels, np.arange(m)] = 1.0

    for epoch in range(epochs):
        # Forward: relu on hidden layers, identity head.
        acts = [x]
        pre = []
        for li in range(n_layers):
            z = weights[li] @ acts[-1] + biases[li][:, None]
            pre.append(z)
            acts.append(np.maximum(z, 0.0) if li < n_layers - 1 else z)
        probs = _softmax_columns(acts[-1])
        loss = float(-np.mean(np.log(probs[labels, np.arange(m)] + 1e-300)))
        if not np.isfinite(loss):
            raise NumericalError(
                f"training loss became non-finite at epoch {epoch}: {loss}"
            )

        grad_z = (probs - onehot) / m
        for li in range(n_layers - 1, -1, -1):
            grad_w = grad_z @ acts[li].T
            grad_b = grad_z.sum(axis=1)
            if li > 0:
                grad_z = (weights[li].T @ grad_z) * (pre[li - 1] > 0.0)
            weights[li] = weights[li] - learning_rate * grad_w
            biases[li] = biases[li] - learning_rate * grad_b

    layers = [
        Layer(
            weight=weights[li],
            bias=biases[li],
            activation="relu" if li < n_layers - 1 else "identity",
            prunable=li < n_layers - 1,
        )
        for li in range(n_layers)
    ]
    return Checkpoint(
        layers=layers,
        name=f"toy-mlp-seed{seed}",
        metadata={
            "seed": seed,
            "epochs": epochs,
            "learning_rate": learning_rate,
            "widths": widths,
        },
    )
