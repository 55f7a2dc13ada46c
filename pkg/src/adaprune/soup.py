"""Greedy weight averaging over a pool of candidate checkpoints.

Candidates are sorted by their evaluation score (best first) and folded
into a running average one at a time; a candidate stays in only if the
averaged model's evaluation does not drop. The best-scoring candidate is
always kept, so the result never evaluates worse than it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ShapeError, SoupEvalError
from .pipeline import Checkpoint, Layer


@dataclass(frozen=True)
class SoupCandidate:
    """A checkpoint paired with its evaluation score (higher is better)."""

    ckpt: Checkpoint
    score: float


def _check_same_structure(ref: Checkpoint, other: Checkpoint, index: int) -> None:
    if len(other.layers) != len(ref.layers):
        raise ShapeError(
            f"checkpoint {index} has {len(other.layers)} layers, expected "
            f"{len(ref.layers)}"
        )
    for li, (a, b) in enumerate(zip(ref.layers, other.layers)):
        if a.weight.shape != b.weight.shape:
            raise ShapeError(
                f"checkpoint {index} layer {li}: weight shape {b.weight.shape} "
                f"does not match {a.weight.shape}"
            )
        if (a.bias is None) != (b.bias is None):
            raise ShapeError(f"checkpoint {index} layer {li}: bias presence differs")
        if a.activation != b.activation:
            raise ShapeError(f"checkpoint {index} layer {li}: activation differs")


def average(ckpts: list[Checkpoint]) -> Checkpoint:
    """Elementwise arithmetic mean of structurally identical checkpoints."""
    if not ckpts:
        raise ValueError("cannot average an empty list of checkpoints")
    ref = ckpts[0]
    for i, other in enumerate(ckpts[1:], start=1):
        _check_same_structure(ref, other, i)
    layers = []
    for li, layer in enumerate(ref.layers):
        weight = np.mean([c.layers[li].weight for c in ckpts], axis=0)
        bias = None
        if layer.bias is not None:
            bias = np.mean([c.layers[li].bias for c in ckpts], axis=0)
        layers.append(
            Layer(weight=weight, bias=bias, activation=layer.activation, prunable=layer.prunable)
        )
    members = [c.name for c in ckpts]
    return Checkpoint(layers=layers, name=f"average-of-{len(ckpts)}", metadata={"members": members})


def greedy_weight_average(
    candidates: list[SoupCandidate],
    eval_fn: Callable[[Checkpoint], float],
) -> tuple[Checkpoint, list[int]]:
    """Greedy inclusion pass over score-sorted candidates.

    Candidates are visited in descending score order (ties keep input
    order). A candidate joins the ingredient set iff the average including
    it evaluates at least as well as the average without it; the empty set
    evaluates to -inf, so the first candidate always joins. Returns the
    final averaged checkpoint and the chosen input indices in inclusion
    order.
    """
    if not candidates:
        raise ValueError("need at least one candidate")
    order = sorted(range(len(candidates)), key=lambda i: -candidates[i].score)

    ingredients: list[Checkpoint] = []
    chosen: list[int] = []
    best_value = float("-inf")
    best_ckpt: Checkpoint | None = None
    for original_index in order:
        trial = average(ingredients + [candidates[original_index].ckpt])
        try:
            value = float(eval_fn(trial))
        except Exception as exc:
            raise SoupEvalError(
                f"evaluation failed for candidate {original_index}"
            ) from exc
        if not ingredients or value >= best_value:
            ingredients.append(candidates[original_index].ckpt)
            chosen.append(original_index)
            best_value = value
            best_ckpt = trial
    assert best_ckpt is not None
    return best_ckpt, chosen
