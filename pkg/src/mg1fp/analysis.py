"""Convergence-rate and conditioning diagnostics.

Given a model, an accepted solution G and an embedding, this module builds
the classical comparison quantities: the first-passage expectation matrices
A_i^* and V (with H = I - V), the splitting pair M = I - F and N whose
iteration matrix M^{-1}N bounds the asymptotic residual reduction, the
factorization coefficients B_i^* with the roots xi and xi_q measuring
conditioning, and the Kronecker-form rate matrix W whose spectral radius
coincides with rho(M^{-1}N).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .embedding import Embedding, eval_coefficient
from .linalg import LUSolver, as_matrix, inf_norm, kron, spectral_radius
from .model import MatrixPolynomial

#: Companion eigenproblems are limited to this many total rows.
COMPANION_GUARD = 2000

#: Kronecker assembly works on m^2-sized matrices; keep m at or below this.
KRON_GUARD = 30

#: Roots with modulus above 1 + this margin count as outside the unit disk.
ROOT_MARGIN = 1e-9


class AnalysisError(Exception):
    """Guard violation or a quantity that does not exist for the input."""


def star_matrices(model: MatrixPolynomial, g: np.ndarray):
    """A_i^* = sum_{j>=i} A_j G^{j-i} for i = 0..d-1, V = sum A_j^*, H = I - V.

    Computed by the backward recurrence A_i^* = A_i + A_{i+1}^* G, one
    matrix product per coefficient.
    """
    g = as_matrix(g, "G")
    m = model.m
    if g.shape != (m, m):
        raise AnalysisError(f"G has shape {g.shape}, expected ({m}, {m})")
    d = model.d
    astar = []
    if d >= 1:
        acc = np.array(model.coeff(d - 1), copy=True)
        astar.append(acc)
        for i in range(d - 2, -1, -1):
            acc = model.coeff(i) + acc @ g
            astar.append(acc)
        astar.reverse()
    v = np.zeros((m, m))
    for a in astar:
        v += a
    return tuple(astar), v, np.eye(m) - v


def _series_tail_sums(series, g: np.ndarray):
    """Backward partial sums R_k = sum_{i>=k} T_i G^{i-k} for k = 1..len-1."""
    n = len(series) - 1
    if n < 1:
        return []
    tails = [None] * n            # tails[k-1] = R_k
    acc = np.array(series[n], copy=True)
    tails[n - 1] = acc
    for k in range(n - 1, 0, -1):
        acc = series[k] + acc @ g
        tails[k - 1] = acc
    return tails


def fmn(emb: Embedding, g: np.ndarray):
    """The splitting pieces F, M = I - F and N of the embedded iteration.

    F = sum_{l=0}^{q} A_l(G) sum_{j=0}^{l} G^j and
    N = sum_{l=-1}^{q} sum_{i>=1} A_{l,i} sum_{j=0}^{i-1} G^j.
    """
    g = as_matrix(g, "G")
    m = emb.m
    if g.shape != (m, m):
        raise AnalysisError(f"G has shape {g.shape}, expected ({m}, {m})")
    f = np.zeros((m, m))
    prefix = np.eye(m)            # sum_{j=0}^{l} G^j, grown incrementally
    gpow = np.eye(m)
    for l in range(0, emb.q + 1):
        if l > 0:
            gpow = gpow @ g
            prefix = prefix + gpow
        f += eval_coefficient(emb, l, g) @ prefix
    n_mat = np.zeros((m, m))
    for l in range(-1, emb.q + 1):
        for tail in _series_tail_sums(emb.coeff_series(l), g):
            n_mat += tail
    return f, np.eye(m) - f, n_mat


@dataclass(frozen=True)
class RateReport:
    rho_MinvN: float
    rho_HinvN: float
    identity_gap: float   # |rho(M^-1 N) - rho(H^-1 N)/(1 + rho(H^-1 N))|


def convergence_rate(emb: Embedding, model: MatrixPolynomial,
                     g: np.ndarray) -> RateReport:
    """rho(M^{-1}N) with the regular-splitting cross-check against H.

    Requires a negative drift so H = I - V is a nonsingular M-matrix; a
    singular H surfaces as an error.
    """
    _, _, h = star_matrices(model, g)
    _, m_mat, n_mat = fmn(emb, g)
    try:
        rho_m = spectral_radius(LUSolver(m_mat).solve(n_mat))
        rho_h = spectral_radius(LUSolver(h).solve(n_mat))
    except Exception as exc:
        raise AnalysisError(f"splitting solve failed (drift >= 0?): {exc}") from exc
    gap = abs(rho_m - rho_h / (1.0 + rho_h))
    return RateReport(rho_MinvN=float(rho_m), rho_HinvN=float(rho_h),
                      identity_gap=float(gap))


def bstar_matrices(emb: Embedding, g: np.ndarray):
    """B_i^* = sum_{j=i}^{q} A_j(G) G^{j-i} for i = 0..q, meaningful when
    the embedding keeps A_{-1}(z) = A_{-1}."""
    g = as_matrix(g, "G")
    if emb.q < 0:
        return ()
    evals = [eval_coefficient(emb, l, g) for l in range(0, emb.q + 1)]
    bstar = [None] * (emb.q + 1)
    acc = evals[emb.q]
    bstar[emb.q] = acc
    for i in range(emb.q - 1, -1, -1):
        acc = evals[i] + acc @ g
        bstar[i] = acc
    return tuple(bstar)


def _min_root_outside_disk(d_coeffs, m: int) -> float:
    """Smallest-modulus root of det(I - sum_{i=0}^{n} D_i z^i) outside the
    closed unit disk, via the block companion matrix of the reversed
    polynomial.  Returns inf when the determinant is constant in z."""
    coeffs = [np.asarray(c, dtype=float) for c in d_coeffs]
    while coeffs and not np.any(coeffs[-1]):
        coeffs.pop()
    n = len(coeffs) - 1
    if n < 1:
        return math.inf
    if n * m > COMPANION_GUARD:
        raise AnalysisError(
            f"companion matrix would have {n * m} rows, above {COMPANION_GUARD}")
    try:
        lead = LUSolver(np.eye(m) - coeffs[0])
    except Exception as exc:
        raise AnalysisError(f"I - D_0 is singular: {exc}") from exc
    comp = np.zeros((n * m, n * m))
    for i in range(1, n + 1):
        comp[:m, (i - 1) * m:i * m] = lead.solve(coeffs[i])
    for i in range(1, n):
        comp[i * m:(i + 1) * m, (i - 1) * m:i * m] = np.eye(m)
    eigs = np.linalg.eigvals(comp)
    roots = []
    for w in eigs:
        if abs(w) <= 1e-14:
            continue
        z = 1.0 / w
        if abs(z) > 1.0 + ROOT_MARGIN:
            roots.append(abs(z))
    if not roots:
        raise AnalysisError("no root outside the unit disk (drift >= 0 or "
                            "numerical failure)")
    return float(min(roots))


def xi_root(model: MatrixPolynomial, g: np.ndarray) -> float:
    """xi: smallest-modulus root of det(I - sum_i A_i^* z^i) beyond |z| = 1."""
    astar, _, _ = star_matrices(model, g)
    return _min_root_outside_disk(astar, model.m)


def xi_q_root(emb: Embedding, g: np.ndarray) -> float:
    """xi_q from the factorized polynomial I - sum_{i=0}^{q} B_i^* z^i.

    Defined for embeddings that keep A_{-1}(z) = A_{-1}; embeddings whose
    tail sits in the constant coefficient have no such factorization.
    """
    if emb.q >= 0 and len(emb.coeff_series(-1)) > 1:
        raise AnalysisError(
            "xi_q needs A_{-1}(z) constant; this embedding spreads the tail "
            "into the constant coefficient")
    if emb.q < 0:
        raise AnalysisError("xi_q is undefined for q = -1")
    return _min_root_outside_disk(bstar_matrices(emb, g), emb.m)


def sq_factorization_gap(emb: Embedding, g: np.ndarray, z0: float) -> float:
    """||U_q(z0) (I - z0^{-1} G) - S_q(z0)||_inf, the factorization check.

    S_q(z) = I - sum_{l=-1}^{q} A_l(G) z^l with the l = -1 term carrying
    z^{-1}; z0 must be nonzero.
    """
    g = as_matrix(g, "G")
    m = emb.m
    uq = np.eye(m).astype(float)
    for i, b in enumerate(bstar_matrices(emb, g)):
        uq = uq - b * (z0 ** i)
    sq = np.eye(m) - eval_coefficient(emb, -1, g) / z0
    for l in range(0, emb.q + 1):
        sq = sq - eval_coefficient(emb, l, g) * (z0 ** l)
    return inf_norm(uq @ (np.eye(m) - g / z0) - sq)


@dataclass(frozen=True)
class KronRate:
    Q_GG: np.ndarray
    P_G: np.ndarray
    W: np.ndarray
    rho_W: float


def kron_rate(emb: Embedding, g: np.ndarray, m_cap: int = KRON_GUARD) -> KronRate:
    """Assemble Q(G,G), P(G) and W = (I - Q)^{-1} P on the m^2 space.

    Q(G,G) = sum_{s=0}^{q} (G^s)' (x) B_s^* and
    P(G) = sum_{l,j} (G^{l+1+j})' (x) R_{j+1}^{(l)} with R the backward
    tail sums of coefficient l's series.  rho(W) equals rho(M^{-1}N).
    """
    g = as_matrix(g, "G")
    m = emb.m
    if m > m_cap:
        raise AnalysisError(f"block size {m} above the Kronecker guard {m_cap}")
    mm = m * m
    cap = max(mm, m)
    max_len = max(len(emb.coeff_series(l)) for l in range(-1, emb.q + 1))
    gpow = [np.eye(m)]
    for _ in range(emb.q + 1 + max_len):
        gpow.append(gpow[-1] @ g)
    q_mat = np.zeros((mm, mm))
    for s, b in enumerate(bstar_matrices(emb, g)):
        q_mat += kron(gpow[s].T, b, size_cap=cap)
    p_mat = np.zeros((mm, mm))
    for l in range(-1, emb.q + 1):
        tails = _series_tail_sums(emb.coeff_series(l), g)
        for j, tail in enumerate(tails):
            p_mat += kron(gpow[l + 1 + j].T, tail, size_cap=cap)
    try:
        w = LUSolver(np.eye(mm) - q_mat).solve(p_mat)
    except Exception as exc:
        raise AnalysisError(f"I - Q(G,G) is singular (drift >= 0?): {exc}") from exc
    return KronRate(Q_GG=q_mat, P_G=p_mat, W=w, rho_W=float(spectral_radius(w)))


@dataclass(frozen=True)
class RateEstimates:
    """Bundle of every diagnostic for a (model, embedding, G) triple."""

    astar: tuple
    V: np.ndarray
    H: np.ndarray
    F: np.ndarray
    M: np.ndarray
    N: np.ndarray
    rho_MinvN: float
    rho_HinvN: float
    bstar: tuple
    xi: float
    xi_q: float | None


def rate_estimates(model: MatrixPolynomial, emb: Embedding,
                   g: np.ndarray) -> RateEstimates:
    astar, v, h = star_matrices(model, g)
    f, m_mat, n_mat = fmn(emb, g)
    rates = convergence_rate(emb, model, g)
    xi = xi_root(model, g)
    try:
        xi_q = xi_q_root(emb, g)
    except AnalysisError:
        xi_q = None
    return RateEstimates(
        astar=astar, V=v, H=h, F=f, M=m_mat, N=n_mat,
        rho_MinvN=rates.rho_MinvN, rho_HinvN=rates.rho_HinvN,
        bstar=bstar_matrices(emb, g), xi=xi, xi_q=xi_q,
    )


def format_diagnostics(entries: dict) -> str:
    """Flat `name = value` text block, one entry per line."""
    lines = []
    for key, value in entries.items():
        if isinstance(value, float):
            lines.append(f"{key} = {value:.17g}")
        else:
            lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
