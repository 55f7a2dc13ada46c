"""Greedy synonym-substitution attack and robustness metrics.

The attack ranks token positions by how much removing their contribution
from the mean embedding drops the true-label score, then walks positions
in that order substituting the synonym that lowers the true-label score
the most, stopping at the first label flip or after the substitution
budget is spent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import ToyDataset
from .pipeline import Checkpoint
from .textmodel import classify, featurize, score_features


@dataclass(frozen=True)
class RobustnessResult:
    """Percentages plus the raw attack counts behind them.

    acc is clean accuracy, aua is accuracy under attack over all examples,
    asr is the share of attempted attacks (one per initially-correct
    example) that flipped the label.
    """

    acc: float
    aua: float
    asr: float
    attempted: int
    succeeded: int


def attack_example(
    model: Checkpoint,
    embedding,
    tokens,
    synonyms: dict[int, list[int]],
    max_subs: int,
) -> tuple[bool, list[int], list[tuple[int, int]]]:
    """Attack one example the model currently classifies correctly.

    The caller guarantees the initial prediction is the true label. Returns
    (flipped, perturbed tokens, substitutions), where each substitution is
    a (position, replacement token) pair in the order it was applied.
    Failing to flip is a normal outcome, not an error.
    """
    tokens = [int(t) for t in tokens]
    true_label, scores = classify(model, embedding, tokens)
    current = list(tokens)
    subs: list[tuple[int, int]] = []
    if max_subs <= 0 or not synonyms:
        return False, current, subs

    d_embed = np.asarray(embedding).shape[1]
    base_true = float(scores[true_label])
    importance = []
    for i in range(len(tokens)):
        rest = tokens[:i] + tokens[i + 1 :]
        feat = featurize(embedding, rest) if rest else np.zeros(d_embed)
        importance.append(base_true - float(score_features(model, feat)[true_label]))
    order = np.argsort(-np.asarray(importance), kind="stable")

    current_true = base_true
    for pos in order:
        if len(subs) >= max_subs:
            break
        best_syn = None
        best_true = current_true
        best_label = true_label
        for syn in synonyms.get(tokens[pos], []):
            trial = list(current)
            trial[pos] = int(syn)
            label, trial_scores = classify(model, embedding, trial)
            if float(trial_scores[true_label]) < best_true:
                best_true = float(trial_scores[true_label])
                best_syn = int(syn)
                best_label = label
        if best_syn is None:
            continue
        current[int(pos)] = best_syn
        current_true = best_true
        subs.append((int(pos), best_syn))
        if best_label != true_label:
            return True, current, subs
    return False, current, subs


def result_from_counts(total: int, correct: int, succeeded: int) -> RobustnessResult:
    """Assemble the metric triple from raw evaluation counts.

    Every correctly classified example counts as one attempted attack, so
    asr uses ``correct`` as its denominator (0 when nothing was attacked).
    """
    if total <= 0:
        raise ValueError("total must be positive")
    if not 0 <= succeeded <= correct <= total:
        raise ValueError(f"need 0 <= succeeded <= correct <= total, got "
                         f"{succeeded}/{correct}/{total}")
    acc = 100.0 * correct / total
    aua = 100.0 * (correct - succeeded) / total
    asr = 100.0 * succeeded / correct if correct else 0.0
    return RobustnessResult(acc=acc, aua=aua, asr=asr, attempted=correct, succeeded=succeeded)


def evaluate_robustness(model: Checkpoint, ds: ToyDataset, max_subs: int) -> RobustnessResult:
    """Classify every example, attack the correct ones, report Acc/Aua/Asr."""
    if not ds.examples:
        raise ValueError("dataset is empty")
    correct = 0
    succeeded = 0
    for tokens, label in ds.examples:
        pred, _ = classify(model, ds.embedding, tokens)
        if pred != label:
            continue
        correct += 1
        flipped, _, _ = attack_example(model, ds.embedding, tokens, ds.synonyms, max_subs)
        if flipped:
            succeeded += 1
    return result_from_counts(len(ds.examples), correct, succeeded)
