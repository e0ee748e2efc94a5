"""Coefficient embeddings defining members of the iteration family.

An embedding rewrites A(z) as sum_{l=-1}^{q} A_l(z) z^{l+1} with nonnegative
series coefficients A_{l,i}, turning the power-series equation into a matrix
polynomial equation of degree q+1 whose coefficients depend on the current
iterate.  The classical Natural / Traditional / U-based schemes and the
fastest-converging mass-in-one-coefficient family are all instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .linalg import DimensionError, as_matrix, horner
from .model import MatrixPolynomial


class EmbeddingError(Exception):
    """Invalid strategy, degree, or coefficient layout."""


@dataclass(frozen=True)
class Embedding:
    """Series coefficients A_{l,i} for l = -1..q, one tuple per l.

    series[l + 1][i] is A_{l,i}; constant coefficients are length-1 tuples.
    tail_owner is the index l* whose series carries the tail of A(z); for
    an all-constant embedding (q = d-1) it degenerates to q.
    """

    q: int
    series: tuple
    strategy: str = "custom"
    m: int = field(init=False)
    tail_owner: int = field(init=False)

    def __init__(self, q: int, series: Iterable[Sequence], strategy: str = "custom"):
        if q < -1:
            raise EmbeddingError(f"q must be >= -1, got {q}")
        rows = []
        m = None
        for l_off, coeff_list in enumerate(series):
            mats = []
            for i, c in enumerate(coeff_list):
                c = as_matrix(c, f"A_({l_off - 1},{i})")
                if m is None:
                    m = c.shape[0]
                if c.shape != (m, m):
                    raise EmbeddingError(
                        f"A_({l_off - 1},{i}) has shape {c.shape}, expected ({m}, {m})")
                c = c.copy()
                c.flags.writeable = False
                mats.append(c)
            if not mats:
                raise EmbeddingError(f"empty series for l = {l_off - 1}")
            rows.append(tuple(mats))
        if len(rows) != q + 2:
            raise EmbeddingError(
                f"need series for l = -1..{q} ({q + 2} of them), got {len(rows)}")
        owner = q
        longest = 1
        for l_off, mats in enumerate(rows):
            if len(mats) > longest:
                longest = len(mats)
                owner = l_off - 1
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "series", tuple(rows))
        object.__setattr__(self, "strategy", strategy)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "tail_owner", owner)

    def coeff_series(self, l: int) -> tuple:
        if not -1 <= l <= self.q:
            raise EmbeddingError(f"coefficient index {l} outside [-1, {self.q}]")
        return self.series[l + 1]

    @property
    def constant(self) -> bool:
        """True when no coefficient depends on the iterate (all series constant)."""
        return all(len(s) <= 1 for s in self.series)


def eval_coefficient(emb: Embedding, l: int, x: np.ndarray) -> np.ndarray:
    """A_l(X), a Horner evaluation of the stored series for coefficient l."""
    series = emb.coeff_series(l)
    if len(series) == 1:
        return series[0]
    x = as_matrix(x, "X")
    if x.shape != (emb.m, emb.m):
        raise DimensionError(f"X has shape {x.shape}, expected ({emb.m}, {emb.m})")
    return horner(series, x)


def make_embedding(model: MatrixPolynomial, strategy: str, q: int | None = None,
                   owner: int | None = None) -> Embedding:
    """Build a named embedding of ``model``.

    natural      q = -1, everything in A_{-1}(z)
    traditional  q = 0, nonlinear part in A_{-1}(z), A_0 constant
    ubased       q = 0, tail in A_0(z)
    optimal      given q, tail in A_q(z): A_q(z) = sum_{i>=q} A_i z^{i-q}
    mass         given q and owner l*, tail in A_{l*}(z) of a degree-(q+1)
                 equation; optimal is mass with owner = q

    q must lie in [-1, d-1]; natural/traditional/ubased fix their own q and
    reject a conflicting explicit value.
    """
    d = model.d
    c = model.coeff

    def fixed_q(expected: int):
        if q is not None and q != expected:
            raise EmbeddingError(
                f"strategy {strategy!r} fixes q = {expected}, got q = {q}")

    if strategy == "natural":
        fixed_q(-1)
        return Embedding(-1, [[c(i) for i in range(-1, d)]], strategy="natural")

    if strategy == "traditional":
        fixed_q(0)
        if d == 0:
            tail = [c(-1)]
        else:
            tail = [c(-1), np.zeros((model.m, model.m))] + [c(i) for i in range(1, d)]
        return Embedding(0, [tail, [c(0) if d >= 1 else np.zeros((model.m, model.m))]],
                         strategy="traditional")

    if strategy == "ubased":
        fixed_q(0)
        a0_series = [c(i) for i in range(0, d)] if d >= 1 else [np.zeros((model.m, model.m))]
        return Embedding(0, [[c(-1)], a0_series], strategy="ubased")

    if strategy in ("optimal", "mass"):
        if q is None:
            raise EmbeddingError(f"strategy {strategy!r} needs an explicit q")
        if not 0 <= q <= max(d - 1, 0):
            raise EmbeddingError(f"q = {q} outside [0, {max(d - 1, 0)}]")
        if strategy == "optimal":
            owner = q
        if owner is None:
            raise EmbeddingError("mass strategy needs the owner index")
        if not -1 <= owner <= q:
            raise EmbeddingError(f"owner {owner} outside [-1, {q}]")
        zeros = np.zeros((model.m, model.m))
        series = []
        for l in range(-1, q + 1):
            if l == owner:
                tail = [c(l) if l <= d - 1 else zeros]
                tail += [zeros] * (q - l)
                tail += [c(i) for i in range(q + 1, d)]
                series.append(tail)
            else:
                series.append([c(l) if l <= d - 1 else zeros])
        tag = "optimal" if owner == q else "mass"
        return Embedding(q, series, strategy=tag)

    raise EmbeddingError(f"unknown strategy {strategy!r}")


@dataclass(frozen=True)
class EmbeddingValidation:
    valid: bool
    max_identity_violation: float   # of A_i = sum_l A_{l,i-l}
    min_entry: float
    first_bad_index: int | None

    def __str__(self) -> str:
        status = "valid" if self.valid else "invalid"
        return (f"{status} (identity violation {self.max_identity_violation:.3e}, "
                f"min entry {self.min_entry:.3e})")


def validate_embedding(emb: Embedding, model: MatrixPolynomial,
                       tol: float = 1e-13) -> EmbeddingValidation:
    """Check nonnegativity and the reconstruction identity against ``model``.

    For every power i the stored pieces must reassemble the original
    coefficient: A_i = A_{-1,i+1} + A_{0,i} + ... + A_{q,i-q}, and pieces
    beyond the model degree must reassemble to zero.
    """
    if emb.m != model.m:
        raise EmbeddingError(
            f"embedding block size {emb.m} does not match model block size {model.m}")
    min_entry = min(float(mat.min()) for s in emb.series for mat in s)
    top = max(l + len(emb.coeff_series(l)) - 1 for l in range(-1, emb.q + 1))
    top = max(top, model.d - 1)
    worst = 0.0
    first_bad = None
    zeros = np.zeros((model.m, model.m))
    for i in range(-1, top + 1):
        total = np.zeros((model.m, model.m))
        for l in range(-1, emb.q + 1):
            k = i - l
            series = emb.coeff_series(l)
            if 0 <= k < len(series):
                total += series[k]
        target = model.coeff(i) if i <= model.d - 1 else zeros
        gap = float(np.abs(total - target).max())
        if gap > worst:
            worst = gap
        if gap > tol and first_bad is None:
            first_bad = i
    valid = min_entry >= 0.0 and worst <= tol
    return EmbeddingValidation(
        valid=valid,
        max_identity_violation=worst,
        min_entry=min_entry,
        first_bad_index=first_bad,
    )


def parse_strategy(text: str) -> dict:
    """Parse the CLI strategy grammar.

    natural | traditional | ubased | optimal:<q> | mass:<ell>:<q>
    Returns kwargs for make_embedding (plus the classical-variant name).
    """
    parts = text.strip().split(":")
    name = parts[0]
    if name in ("natural", "traditional", "ubased"):
        if len(parts) != 1:
            raise EmbeddingError(f"strategy {name!r} takes no parameters")
        return {"strategy": name}
    if name == "optimal":
        if len(parts) != 2:
            raise EmbeddingError("expected optimal:<q>")
        return {"strategy": "optimal", "q": int(parts[1])}
    if name == "mass":
        if len(parts) != 3:
            raise EmbeddingError("expected mass:<ell>:<q>")
        return {"strategy": "mass", "owner": int(parts[1]), "q": int(parts[2])}
    raise EmbeddingError(f"unknown strategy {text!r}")
