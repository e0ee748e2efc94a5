"""Matrix-polynomial model of an M/G/1-type Markov chain.

The chain's repeating block row A_{-1}, A_0, ..., A_{d-1} is stored as a
MatrixPolynomial; A(z) = sum_{i=0}^{d} A_{i-1} z^i.  The module evaluates
A at matrix arguments, measures fixed-point residuals, computes the drift,
validates the stochastic structure and reads/writes the MG1v1 text format.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .linalg import (
    DimensionError,
    LUSolver,
    SingularMatrixError,
    as_matrix,
    horner,
    inf_norm,
)

#: Row sums of sum_i A_i may deviate from 1 by this much and still count
#: as stochastic; an order above accumulated roundoff for d up to ~1500.
ROWSUM_TOL = 1e-12


class ModelError(Exception):
    """Raised for structurally invalid models or misuse of one."""


@dataclass(frozen=True)
class MatrixPolynomial:
    """Coefficients [A_{-1}, A_0, ..., A_{d-1}] of the block row.

    coeff(i) returns A_i for i in [-1, d-1].  Instances are immutable;
    the coefficient arrays are copied in and never handed out writable.
    """

    coeffs: tuple
    m: int = field(init=False)
    d: int = field(init=False)

    def __init__(self, coeffs: Iterable):
        mats = [as_matrix(c, f"coefficient {i - 1}") for i, c in enumerate(coeffs)]
        if not mats:
            raise ModelError("a model needs at least the A_{-1} coefficient")
        m = mats[0].shape[0]
        for i, c in enumerate(mats):
            if c.shape != (m, m):
                raise ModelError(
                    f"coefficient {i - 1} has shape {c.shape}, expected ({m}, {m})"
                )
        frozen = []
        for c in mats:
            c = c.copy()
            c.flags.writeable = False
            frozen.append(c)
        object.__setattr__(self, "coeffs", tuple(frozen))
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "d", len(frozen) - 1)

    def coeff(self, i: int) -> np.ndarray:
        """A_i for -1 <= i <= d-1."""
        if not -1 <= i <= self.d - 1:
            raise IndexError(f"coefficient index {i} outside [-1, {self.d - 1}]")
        return self.coeffs[i + 1]

    def coeff_sum(self) -> np.ndarray:
        """A = sum_i A_i."""
        total = np.zeros((self.m, self.m))
        for c in self.coeffs:
            total += c
        return total

    @property
    def stochastic(self) -> bool:
        rs = self.coeff_sum() @ np.ones(self.m)
        return bool(np.abs(rs - 1.0).max() <= ROWSUM_TOL)


@dataclass(frozen=True)
class ModelSummary:
    """Drift diagnostics: stationary vector of A, jump moments, recurrence."""

    alpha: np.ndarray
    a_vec: np.ndarray
    mu: float
    recurrent: bool


@dataclass(frozen=True)
class ModelValidation:
    """Report produced by validate_model; never raises."""

    valid: bool
    stochastic: bool
    substochastic: bool
    min_entry: float
    negative_entries: tuple       # (coefficient index i, row, col, value)
    max_rowsum_deviation: float   # of sum_i A_i from 1

    def __str__(self) -> str:
        status = "valid" if self.valid else "invalid"
        kind = "stochastic" if self.stochastic else (
            "substochastic" if self.substochastic else "not substochastic")
        return f"{status}, {kind} (min entry {self.min_entry:.3e}, " \
               f"rowsum deviation {self.max_rowsum_deviation:.3e})"


def eval_poly(model: MatrixPolynomial, x: np.ndarray) -> np.ndarray:
    """A(X) = sum_{i=0}^{d} A_{i-1} X^i by Horner's rule."""
    x = as_matrix(x, "X")
    if x.shape != (model.m, model.m):
        raise DimensionError(
            f"X has shape {x.shape}, expected ({model.m}, {model.m})")
    return horner(model.coeffs, x)


def residual_delta(model: MatrixPolynomial, x: np.ndarray) -> float:
    """Scaled fixed-point residual (1/m) * ||X - A(X)||_inf."""
    return inf_norm(x - eval_poly(model, x)) / model.m


def drift(model: MatrixPolynomial) -> ModelSummary:
    """Stationary vector alpha of A = sum A_i and the drift mu = alpha' a.

    a = sum_i i * A_i * 1.  alpha is obtained by replacing the last
    equation of (A' - I) x = 0 with the normalization sum(x) = 1 and
    LU-solving.  Requires a stochastic model; a reducible A surfaces as a
    singular solve or as a non-probability solution.
    """
    m = model.m
    a_mat = model.coeff_sum()
    rowsum_dev = float(np.abs(a_mat @ np.ones(m) - 1.0).max())
    if rowsum_dev > ROWSUM_TOL:
        raise ModelError(
            f"drift needs a stochastic model; rowsum deviation {rowsum_dev:.3e}")
    system = a_mat.T - np.eye(m)
    system[-1, :] = 1.0
    rhs = np.zeros(m)
    rhs[-1] = 1.0
    try:
        alpha = LUSolver(system).solve(rhs)
    except SingularMatrixError as exc:
        raise ModelError(f"stationary vector is not unique: {exc}") from exc
    if np.min(alpha) < -1e-10:
        raise ModelError("stationary vector has negative entries; A may be reducible")
    alpha = np.clip(alpha, 0.0, None)
    alpha /= alpha.sum()
    a_vec = np.zeros(m)
    for i in range(-1, model.d):
        a_vec += i * (model.coeff(i) @ np.ones(m))
    mu = float(alpha @ a_vec)
    return ModelSummary(alpha=alpha, a_vec=a_vec, mu=mu, recurrent=bool(mu <= 0.0))


def validate_model(model: MatrixPolynomial, tol: float = ROWSUM_TOL) -> ModelValidation:
    """Check nonnegativity of every coefficient and the row sums of sum A_i."""
    negatives = []
    min_entry = np.inf
    for i in range(-1, model.d):
        c = model.coeff(i)
        min_entry = min(min_entry, float(c.min()))
        if c.min() < 0.0:
            rows, cols = np.nonzero(c < 0.0)
            for r, k in zip(rows, cols):
                negatives.append((i, int(r), int(k), float(c[r, k])))
    rs = model.coeff_sum() @ np.ones(model.m)
    dev = float(np.abs(rs - 1.0).max())
    stochastic = dev <= tol
    substochastic = bool(rs.max() <= 1.0 + tol)
    valid = not negatives and substochastic
    return ModelValidation(
        valid=valid,
        stochastic=stochastic,
        substochastic=substochastic,
        min_entry=float(min_entry),
        negative_entries=tuple(negatives),
        max_rowsum_deviation=dev,
    )


# MG1v1 text format: header "MG1 m d", then d+1 blocks (A_{-1} first) of
# m rows with m values each, 17 significant digits; '#' lines are comments.

def save_model(model: MatrixPolynomial, path) -> None:
    lines = [f"MG1 {model.m} {model.d}"]
    for i in range(-1, model.d):
        lines.append(f"# A_{i}")
        for row in model.coeff(i):
            lines.append(" ".join(f"{v:.16e}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path) -> MatrixPolynomial:
    rows: list[Sequence[float]] = []
    header = None
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if header is None:
            parts = line.split()
            if len(parts) != 3 or parts[0] != "MG1":
                raise ModelError(f"bad MG1v1 header: {line!r}")
            header = (int(parts[1]), int(parts[2]))
            continue
        rows.append([float(tok) for tok in line.split()])
    if header is None:
        raise ModelError("empty model file")
    m, d = header
    if m < 1 or d < 0:
        raise ModelError(f"bad dimensions in header: m={m}, d={d}")
    if len(rows) != (d + 1) * m or any(len(r) != m for r in rows):
        raise ModelError(
            f"expected {(d + 1) * m} rows of {m} values, got {len(rows)}")
    data = np.array(rows)
    coeffs = [data[k * m:(k + 1) * m, :] for k in range(d + 1)]
    return MatrixPolynomial(coeffs)
