"""Dense float64 linear algebra underpinning the pruning stack.

All routines operate on plain numpy arrays (row-major, 64-bit floats) and
are pure functions of their inputs; nothing is mutated in place, so values
are safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .errors import ShapeError, SingularMatrixError

# Symmetry precondition tolerance, relative to the largest entry magnitude.
SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class Dims:
    """Problem sizes for one layer: input width, output width, sample count."""

    d_in: int
    d_out: int
    n_samples: int

    def __post_init__(self):
        for name in ("d_in", "d_out", "n_samples"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


def as_matrix(data, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting non-finite entries."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got {arr.ndim}-D")
    if arr.size and not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_vector(data, name: str = "vector") -> np.ndarray:
    """Coerce to a 1-D float64 array, rejecting non-finite entries."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got {arr.ndim}-D")
    if arr.size and not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit inner-dimension check."""
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}"
        )
    return a @ b


def _check_symmetric(a: np.ndarray, name: str) -> None:
    if not a.size:
        return
    scale = max(1.0, float(np.abs(a).max()))
    if float(np.abs(a - a.T).max()) > SYMMETRY_TOL * scale:
        raise ShapeError(f"{name} is not symmetric within {SYMMETRY_TOL:g}")


def _cholesky(m: np.ndarray, context: str):
    """Lower Cholesky factor of ``m``; singularity errors carry the pivot index."""
    factor, info = lapack.dpotrf(m, lower=1, clean=1, overwrite_a=1)
    if info > 0:
        raise SingularMatrixError(
            f"{context} is not positive definite: pivot {info - 1} failed;"
            " increase the damping",
            pivot=info - 1,
        )
    if info < 0:
        raise ValueError(f"illegal argument {-info} passed to dpotrf")
    return factor


def damped_inverse(a, damping: float) -> np.ndarray:
    """Inverse of the symmetric positive definite matrix ``a + damping * I``.

    Computed from a Cholesky factorization; the returned matrix is exactly
    symmetric. Raises SingularMatrixError (naming the failing pivot) when
    the damped matrix is not positive definite.
    """
    a = as_matrix(a, "matrix")
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"matrix must be square, got {a.shape[0]}x{a.shape[1]}")
    if damping < 0:
        raise ValueError("damping must be nonnegative")
    _check_symmetric(a, "matrix")
    m = a.copy()
    m[np.diag_indices_from(m)] += damping
    factor = _cholesky(m, "damped matrix")
    inv, info = lapack.dpotri(factor, lower=1, overwrite_c=1)
    if info != 0:
        raise SingularMatrixError(
            f"inversion from the Cholesky factor failed (info={info})"
        )
    lower = np.tril(inv)
    return lower + np.tril(inv, -1).T


def least_squares(xhat, y, damping: float) -> np.ndarray:
    """Ridge solution of ``w @ xhat ~ y`` with samples as columns.

    Minimizes ||w @ xhat - y||_F^2 + damping * ||w||_F^2, i.e.
    w = y @ xhat.T @ (xhat @ xhat.T + damping * I)^-1, computed with a
    Cholesky solve rather than an explicit inverse. ``xhat`` is
    d_in x n_samples, ``y`` is d_out x n_samples; the result is
    d_out x d_in.
    """
    xhat = as_matrix(xhat, "inputs")
    y = as_matrix(y, "targets")
    if xhat.shape[1] != y.shape[1]:
        raise ShapeError(
            f"inputs have {xhat.shape[1]} samples but targets have {y.shape[1]}"
        )
    if damping < 0:
        raise ValueError("damping must be nonnegative")
    gram = xhat @ xhat.T
    gram = 0.5 * (gram + gram.T)
    gram[np.diag_indices_from(gram)] += damping
    factor = _cholesky(gram, "input gram matrix")
    sol, info = lapack.dpotrs(factor, xhat @ y.T, lower=1)
    if info != 0:
        raise SingularMatrixError(f"triangular solve failed (info={info})")
    return np.ascontiguousarray(sol.T)
