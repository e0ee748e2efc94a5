"""Dense real-matrix primitives shared by the whole package.

Everything operates on plain 2-D float64 numpy arrays.  The heavy lifting
(LU factorization, eigenvalues) is delegated to scipy/numpy; this module
adds the argument checking and failure modes the callers rely on.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve


class LinalgError(Exception):
    """Base error for kernel failures."""


class DimensionError(LinalgError):
    """Operands have incompatible shapes."""


class SingularMatrixError(LinalgError):
    """A pivot fell below the singularity threshold."""


class ConvergenceError(LinalgError):
    """An iterative computation did not converge within its cap."""


#: Unit roundoff of IEEE binary64, the machine precision used in stop rules.
UNIT_ROUNDOFF = 2.0 ** -53

#: Guard for dense eigenvalue computations: use them while m*m <= this.
_DENSE_EIG_CAP = 10 ** 6

#: Largest dimension a Kronecker product result may have by default.
DEFAULT_KRON_CAP = 10 ** 4


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return ``a`` as a 2-D float64 array."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise LinalgError(f"{name} contains non-finite entries")
    return arr


def is_nonnegative(a: np.ndarray, tol: float = 0.0) -> bool:
    """Entrywise nonnegativity predicate (within ``-tol``)."""
    return bool(np.min(a) >= -tol)


def inf_norm(a) -> float:
    """Maximum absolute row sum of ``a``."""
    arr = as_matrix(a)
    return float(np.abs(arr).sum(axis=1).max())


class LUSolver:
    """Pivoted LU factorization of a square matrix, reusable for many solves.

    Raises SingularMatrixError when any pivot magnitude falls below
    ``pivot_tol`` (default 1e-300), mirroring an exactly singular system.
    """

    def __init__(self, a, pivot_tol: float = 1e-300):
        arr = as_matrix(a, "A")
        if arr.shape[0] != arr.shape[1]:
            raise DimensionError(f"A must be square, got shape {arr.shape}")
        # Singularity is detected from the pivots below; scipy's warning
        # about exact zeros would only duplicate the raised error.
        with np.errstate(all="ignore"), warnings.catch_warnings():
            warnings.simplefilter("ignore", LinAlgWarning)
            lu, piv = lu_factor(arr, check_finite=False)
        pivots = np.abs(np.diag(lu))
        if not np.all(np.isfinite(lu)) or pivots.min() < pivot_tol:
            raise SingularMatrixError(
                f"matrix is singular to working precision (min pivot {pivots.min():.3e})"
            )
        self._lu = (lu, piv)
        self.n = arr.shape[0]

    def solve(self, b) -> np.ndarray:
        rhs = np.asarray(b, dtype=float)
        rows = rhs.shape[0]
        if rows != self.n:
            raise DimensionError(f"right-hand side has {rows} rows, expected {self.n}")
        return lu_solve(self._lu, rhs, check_finite=False)


def solve_linear(a, b, pivot_tol: float = 1e-300) -> np.ndarray:
    """Solve A X = B by pivoted LU factorization."""
    return LUSolver(a, pivot_tol=pivot_tol).solve(b)


def spectral_radius(a, max_iter: int = 10000, tol: float = 1e-12) -> float:
    """Spectral radius of a square matrix.

    Uses a dense eigenvalue computation up to the size guard, falling back
    to a shifted power iteration (adequate for the nonnegative matrices
    seen here) beyond it.  The fallback raises ConvergenceError when the
    iteration cap is reached without the estimate settling.
    """
    arr = as_matrix(a, "A")
    n, m = arr.shape
    if n != m:
        raise DimensionError(f"A must be square, got shape {arr.shape}")
    if n * n <= _DENSE_EIG_CAP:
        return float(np.abs(np.linalg.eigvals(arr)).max())
    # Shifted power iteration: the shift turns dominant-eigenvalue sign
    # ambiguity into plain growth of |lambda + s|.
    shift = inf_norm(arr)
    if shift == 0.0:
        return 0.0
    shifted = arr + shift * np.eye(n)
    v = np.full(n, 1.0 / np.sqrt(n))
    prev = 0.0
    for _ in range(max_iter):
        w = shifted @ v
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        v = w / lam
        if abs(lam - prev) <= tol * max(1.0, lam):
            return abs(lam - shift)
        prev = lam
    raise ConvergenceError(f"power iteration did not settle in {max_iter} steps")


def kron(a, b, size_cap: int = DEFAULT_KRON_CAP) -> np.ndarray:
    """Kronecker product with a guard on the result dimensions."""
    aa = as_matrix(a, "A")
    bb = as_matrix(b, "B")
    rows = aa.shape[0] * bb.shape[0]
    cols = aa.shape[1] * bb.shape[1]
    if max(rows, cols) > size_cap:
        raise DimensionError(
            f"Kronecker result would be {rows}x{cols}, above the cap {size_cap}"
        )
    return np.kron(aa, bb)


def horner(coeffs, x: np.ndarray) -> np.ndarray:
    """Evaluate sum_i coeffs[i] x^i with Horner's rule.

    ``coeffs`` is a sequence of m-by-m arrays ordered by ascending power;
    len(coeffs) - 1 matrix products are performed.  An empty sequence
    evaluates to the zero matrix.
    """
    m = x.shape[0]
    if x.shape[0] != x.shape[1]:
        raise DimensionError(f"X must be square, got shape {x.shape}")
    if len(coeffs) == 0:
        return np.zeros((m, m))
    acc = np.array(coeffs[-1], dtype=float, copy=True)
    if acc.shape != x.shape:
        raise DimensionError(
            f"coefficient shape {acc.shape} does not match X shape {x.shape}"
        )
    for c in reversed(coeffs[:-1]):
        acc = c + acc @ x
    return acc
