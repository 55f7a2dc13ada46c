"""Per-row hessian-guided pruning of one linear layer.

Each step removes the weight with the smallest predicted loss increase
(w_p^2 over the matching inverse-hessian diagonal entry), spreads the
correction over the surviving weights through the inverse-hessian column,
and downdates the inverse. Rows are independent: each row owns a private
copy of the inverse-hessian state, so a layer's rows may be processed in
any order or concurrently with identical results.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, SingularMatrixError
from .hessian import (
    DEFAULT_DAMPING,
    PIVOT_FLOOR,
    HessianState,
    build_hessian,
    init_state,
    remove_index,
)
from .linalg import Dims, as_matrix


@dataclass(frozen=True)
class SparsityTarget:
    """How much of each row to remove.

    Unstructured mode zeroes ``int(d_in * s)`` weights per row. Structured
    mode keeps exactly ``n_keep`` nonzeros in every bank of ``bank``
    consecutive positions (``bank`` must divide the row width).
    """

    mode: str
    s: float = 0.0
    n_keep: int = 0
    bank: int = 0

    def __post_init__(self):
        if self.mode == "unstructured":
            if not 0.0 <= self.s < 1.0:
                raise ValueError(f"sparsity ratio must be in [0, 1), got {self.s}")
        elif self.mode == "structured":
            if self.bank < 2:
                raise ValueError("bank size must be at least 2")
            if not 1 <= self.n_keep < self.bank:
                raise ValueError(
                    f"need 1 <= n_keep < bank, got n_keep={self.n_keep} bank={self.bank}"
                )
        else:
            raise ValueError(f"unknown sparsity mode {self.mode!r}")

    @classmethod
    def unstructured(cls, s: float) -> "SparsityTarget":
        return cls(mode="unstructured", s=float(s))

    @classmethod
    def structured(cls, n_keep: int, bank: int) -> "SparsityTarget":
        return cls(mode="structured", n_keep=int(n_keep), bank=int(bank))


@dataclass
class RowTrajectory:
    """Outcome of pruning one row: removal order, predicted per-step losses,
    and the compensated final row (exactly zero at every pruned position)."""

    pruned_order: list[int]
    step_losses: list[float]
    final_row: np.ndarray


@dataclass(frozen=True)
class LayerPruneStats:
    """Per-layer summary: achieved sparsity, reconstruction MSE against the
    dense weights on the same activations, summed step losses, wall time."""

    dims: Dims
    sparsity: float
    mse: float
    step_loss_sum: float
    seconds: float


def _as_row(row, expected: int | None = None) -> np.ndarray:
    arr = np.asarray(row, dtype=np.float64)
    if arr.ndim == 2 and arr.shape[0] == 1:
        arr = arr[0]
    if arr.ndim != 1:
        raise ShapeError(f"row must be 1 x d or 1-D, got shape {np.shape(row)}")
    if arr.size and not np.isfinite(arr).all():
        raise ValueError("row contains non-finite entries")
    if expected is not None and arr.size != expected:
        raise ShapeError(f"row has {arr.size} entries, expected {expected}")
    return arr


def select_prune_index(row, state: HessianState, candidates) -> int:
    """Candidate with the smallest w_p^2 / inv[p, p]; ties go to the lowest index."""
    row = _as_row(row, state.dim)
    cand = sorted({int(c) for c in candidates})
    if not cand:
        raise ValueError("candidate set is empty")
    if not set(cand) <= set(state.active):
        raise ValueError("candidates must be a subset of the active indices")
    idx = np.asarray(cand, dtype=int)
    quotients = row[idx] ** 2 / state.inv[idx, idx]
    return int(idx[int(np.argmin(quotients))])


def apply_removal(row, state: HessianState, p: int) -> np.ndarray:
    """Zero position ``p`` and compensate the survivors.

    Returns row - (row[p] / inv[p, p]) * inv[:, p] with position ``p`` then
    set exactly to zero. The caller must follow up with ``remove_index`` to
    keep the state consistent.
    """
    row = _as_row(row, state.dim)
    p = int(p)
    if p not in state.active:
        raise IndexError(f"index {p} is not active")
    pivot = float(state.inv[p, p])
    if pivot <= PIVOT_FLOOR:
        raise SingularMatrixError(
            f"inverse-hessian pivot {pivot:.3e} at index {p} is below {PIVOT_FLOOR:g}",
            pivot=p,
        )
    updated = row - (row[p] / pivot) * state.inv[:, p]
    updated[p] = 0.0
    return updated


def _prune_row_with_state(row: np.ndarray, state: HessianState, target: SparsityTarget) -> RowTrajectory:
    d_in = row.size
    row = row.copy()
    pruned: list[int] = []
    losses: list[float] = []

    if target.mode == "unstructured":
        steps = int(d_in * target.s)
        if not row.any():
            # All-zero rows cost nothing; removals happen in index order.
            pruned = list(range(steps))
            return RowTrajectory(pruned, [0.0] * steps, row)
        for _ in range(steps):
            p = select_prune_index(row, state, state.active)
            losses.append(float(row[p] ** 2 / state.inv[p, p]))
            row = apply_removal(row, state, p)
            state = remove_index(state, p)
            pruned.append(p)
        return RowTrajectory(pruned, losses, row)

    bank = target.bank
    if d_in % bank != 0:
        raise ValueError(f"bank size {bank} does not divide row width {d_in}")
    n_banks = d_in // bank
    if not row.any():
        drop = bank - target.n_keep
        pruned = [b * bank + j for b in range(n_banks) for j in range(drop)]
        return RowTrajectory(pruned, [0.0] * len(pruned), row)
    remaining = np.full(n_banks, bank, dtype=int)
    while (remaining > target.n_keep).any():
        candidates = [i for i in state.active if remaining[i // bank] > target.n_keep]
        p = select_prune_index(row, state, candidates)
        losses.append(float(row[p] ** 2 / state.inv[p, p]))
        row = apply_removal(row, state, p)
        state = remove_index(state, p)
        remaining[p // bank] -= 1
        pruned.append(p)
    return RowTrajectory(pruned, losses, row)


def prune_row(row, h, target: SparsityTarget) -> RowTrajectory:
    """Prune one row against a precomputed (damped) hessian."""
    h = as_matrix(h, "hessian")
    row = _as_row(row, h.shape[0])
    return _prune_row_with_state(row, init_state(h), target)


def prune_layer(w, x, target: SparsityTarget, damping: float = DEFAULT_DAMPING):
    """Prune every row of a weight matrix against shared calibration activations.

    The hessian is built and inverted once; each row then mutates a private
    clone of the inverse state, so results do not depend on row order.
    Returns the pruned weights and a LayerPruneStats with the achieved
    sparsity and the reconstruction MSE
    mean((w @ x - pruned @ x) ** 2).
    """
    w = as_matrix(w, "weights")
    x = as_matrix(x, "activations")
    if w.shape[1] != x.shape[0]:
        raise ShapeError(
            f"weights expect {w.shape[1]} inputs but activations have {x.shape[0]} rows"
        )
    t0 = time.perf_counter()
    d_out, d_in = w.shape
    dims = Dims(d_in=d_in, d_out=d_out, n_samples=x.shape[1])
    if target.mode == "unstructured" and int(d_in * target.s) == 0:
        return w.copy(), LayerPruneStats(dims, 0.0, 0.0, 0.0, time.perf_counter() - t0)

    base = init_state(build_hessian(x, damping))
    pruned_w = w.copy()
    loss_sum = 0.0
    pruned_count = 0
    for i in range(d_out):
        traj = _prune_row_with_state(pruned_w[i], base.clone(), target)
        pruned_w[i] = traj.final_row
        loss_sum += float(sum(traj.step_losses))
        pruned_count += len(traj.pruned_order)
    mse = float(np.mean((w @ x - pruned_w @ x) ** 2))
    stats = LayerPruneStats(
        dims, pruned_count / w.size, mse, loss_sum, time.perf_counter() - t0
    )
    return pruned_w, stats
