"""Layer hessian construction, inversion, and rank-1 removal downdates.

The hessian of the per-row reconstruction objective is the gram matrix of
the calibration activations, so it is shared by every row of a layer and
never depends on the weights. Removing one input coordinate shrinks the
problem by one; the inverse is maintained with a Gaussian-elimination
downdate instead of refactoring after every removal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, SingularMatrixError
from .linalg import as_matrix, damped_inverse

DEFAULT_DAMPING = 1e-4

# Inverse-hessian diagonal entries at or below this floor abort the removal
# instead of dividing by them.
PIVOT_FLOOR = 1e-12


@dataclass
class HessianState:
    """Inverse hessian restricted to the still-active coordinate set.

    ``inv`` keeps the original dim x dim shape with pruned rows and columns
    pinned to exactly zero, so coordinate indices stay stable across the
    whole removal trajectory. The block of ``inv`` indexed by ``active`` is
    the true inverse of the hessian restricted to those coordinates.
    """

    inv: np.ndarray
    active: list[int]
    dim: int

    def clone(self) -> "HessianState":
        return HessianState(self.inv.copy(), list(self.active), self.dim)


def build_hessian(x, damping: float) -> np.ndarray:
    """Gram matrix of the activations plus ``damping`` on the diagonal.

    ``x`` holds calibration activations with samples as columns
    (d_in x n_samples). The result is exactly symmetric.
    """
    x = as_matrix(x, "activations")
    if x.shape[1] < 1:
        raise ShapeError("need at least one calibration column")
    if damping < 0:
        raise ValueError("damping must be nonnegative")
    h = x @ x.T
    h = 0.5 * (h + h.T)
    h[np.diag_indices_from(h)] += damping
    return h


def init_state(h) -> HessianState:
    """Invert a (damped) hessian and mark every coordinate active."""
    h = as_matrix(h, "hessian")
    try:
        inv = damped_inverse(h, 0.0)
    except SingularMatrixError as exc:
        raise SingularMatrixError(
            f"hessian is singular (pivot {exc.pivot}); raise the damping and rebuild",
            pivot=exc.pivot,
        ) from exc
    return HessianState(inv=inv, active=list(range(h.shape[0])), dim=h.shape[0])


def remove_index(state: HessianState, p: int) -> HessianState:
    """Downdate the inverse for the removal of coordinate ``p``.

    Returns a new state whose active block equals the inverse of the
    hessian with row/column ``p`` deleted; row and column ``p`` of the
    stored matrix are zeroed and ``p`` leaves the active set.
    """
    p = int(p)
    if p not in state.active:
        raise IndexError(f"index {p} is not active")
    pivot = float(state.inv[p, p])
    if pivot <= PIVOT_FLOOR:
        raise SingularMatrixError(
            f"inverse-hessian pivot {pivot:.3e} at index {p} is below {PIVOT_FLOOR:g}",
            pivot=p,
        )
    col = state.inv[:, p]
    inv = state.inv - np.outer(col, col) / pivot
    inv[p, :] = 0.0
    inv[:, p] = 0.0
    return HessianState(inv=inv, active=[i for i in state.active if i != p], dim=state.dim)
