"""Benchmark model generators.

Two families:

* gen_synthetic builds circulant-based chains with a prescribed drift.
  With no perturbation (sigma = 0) the transpose of the circulant shift
  solves the matrix equation exactly and the drift equals the requested
  value to roundoff, which makes these models exact-solution benchmarks.
* gen_phph builds the block row of the queue-length chain of a PH/PH/1
  queue with Erlang services and a pseudo heavy-tailed arrival process,
  truncated once the remaining tail of the coefficient series is
  negligible.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .linalg import LUSolver, kron
from .model import MatrixPolynomial


class GeneratorError(Exception):
    """Invalid or infeasible generator parameters."""


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the circulant family.

    m, d       block size and polynomial degree
    mu         target drift, in [-1, 0)
    s1         decay base of the up-jump weights, in (0, 1)
    s2         decay base of the perturbation, in (0, 1)
    sigma      perturbation amplitude, >= 0
    seed       RNG seed for the perturbation matrices
    """

    m: int
    d: int
    mu: float
    s1: float
    s2: float
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.d < 1:
            raise GeneratorError(f"need m >= 1 and d >= 1, got m={self.m}, d={self.d}")
        if not -1.0 <= self.mu < 0.0:
            raise GeneratorError(f"target drift must lie in [-1, 0), got {self.mu}")
        if not 0.0 < self.s1 < 1.0 or not 0.0 < self.s2 < 1.0:
            raise GeneratorError("decay bases s1, s2 must lie in (0, 1)")
        if self.sigma < 0.0:
            raise GeneratorError("sigma must be nonnegative")

    def as_dict(self) -> dict:
        return asdict(self)


def circulant_shift(m: int) -> np.ndarray:
    """The m-by-m permutation with ones where j - i = 1 mod m."""
    c = np.zeros((m, m))
    for i in range(m):
        c[i, (i + 1) % m] = 1.0
    return c


def synthetic_weights(spec: SyntheticSpec) -> np.ndarray:
    """Probability weights v_{-1}, ..., v_{d-1} realizing the target drift.

    The up-jump weights decay as s1^{i-1}/i and are scaled so that the
    total up-drift is (1 + mu)/2, balanced by v_{-1} = (1 - mu)/2; this
    keeps every weight nonnegative for mu in [-1, 0) while the sum is 1
    and -v_{-1} + sum_i i v_i equals mu exactly.
    """
    d, mu = spec.d, spec.mu
    v = np.zeros(d + 1)           # v[i + 1] = v_i
    if d == 1:
        v[0] = -mu
        v[1] = 1.0 + mu
        return v
    i = np.arange(1, d)
    profile = spec.s1 ** (i - 1.0) / i
    up_drift_unit = float((i * profile).sum())       # sum_i i * s1^{i-1}/i
    theta = (1.0 + mu) / 2.0 / up_drift_unit
    v[0] = (1.0 - mu) / 2.0
    v[2:] = theta * profile
    v[1] = 1.0 - v[0] - v[2:].sum()
    if v.min() < 0.0:
        raise GeneratorError(
            f"no nonnegative weights reach drift {mu} with s1={spec.s1} "
            f"(v_0 = {v[1]:.3e})")
    return v


def gen_synthetic(spec: SyntheticSpec) -> MatrixPolynomial:
    """Build the circulant benchmark model for ``spec``.

    A_i = v_i C^i for sigma = 0; a positive sigma adds the decaying random
    perturbation sigma * s2^{m(i+1)} R_i Delta and renormalizes rows to
    keep the coefficient sum stochastic.
    """
    m, d = spec.m, spec.d
    v = synthetic_weights(spec)
    c = circulant_shift(m)
    cpow = np.linalg.matrix_power
    raw = [v[i + 1] * (c.T if i == -1 else cpow(c, i)) for i in range(-1, d)]
    if spec.sigma == 0.0:
        return MatrixPolynomial(raw)
    rng = np.random.Generator(np.random.Philox(spec.seed))
    delta = np.diag(spec.s2 ** np.arange(m))
    perturbed = []
    for i in range(-1, d):
        r = rng.random((m, m))
        perturbed.append(raw[i + 1] + spec.sigma * spec.s2 ** (m * (i + 1)) * r @ delta)
    rowsum = np.zeros(m)
    for mat in perturbed:
        rowsum += mat @ np.ones(m)
    scale = 1.0 / rowsum
    return MatrixPolynomial([mat * scale[:, None] for mat in perturbed])


@dataclass(frozen=True)
class PhPhSpec:
    """Parameters of the PH/PH/1 queue benchmark.

    n1, n2     arrival / service phase counts
    lam        Erlang stage rate (mean service time n2 / lam)
    a, b, c    heavy-tail arrival parameters, a > 1, a > b > 0, c > 0
    rho        load, in (0, 1) for a stable queue
    trunc_tol  series truncation threshold on the remaining tail
    """

    n1: int = 10
    n2: int = 10
    lam: float = 10.0
    a: float = 2.0
    b: float = 1.0
    c: float = 1.5
    rho: float = 0.85
    trunc_tol: float = 1e-16

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise GeneratorError("phase counts must be at least 1")
        if self.lam <= 0.0:
            raise GeneratorError("lam must be positive")
        if not (self.a > 1.0 and self.a > self.b > 0.0 and self.c > 0.0):
            raise GeneratorError(
                f"need a > 1, a > b > 0, c > 0; got a={self.a}, b={self.b}, c={self.c}")
        if not 0.0 < self.rho < 1.0:
            raise GeneratorError(f"rho = {self.rho} gives an unstable queue")
        if self.trunc_tol <= 0.0:
            raise GeneratorError("trunc_tol must be positive")

    def as_dict(self) -> dict:
        return asdict(self)


def erlang_ph(n: int, lam: float):
    """Erlang(n, lam) phase-type pair (beta, S); -beta' S^{-1} 1 = n / lam."""
    beta = np.zeros(n)
    beta[0] = 1.0
    s = np.zeros((n, n))
    for i in range(n):
        s[i, i] = -lam
        if i + 1 < n:
            s[i, i + 1] = lam
    return beta, s


def heavy_tail_ph(n1: int, a: float, b: float, c: float):
    """Pseudo heavy-tailed phase-type pair (tau, T0), normalized to mean 1.

    The underlying generator Q has exit rate c from state 1, jump rates
    (1/a)^{i-1} from state 1 to state i and return rates (b/a)^{i-1} from
    state i back to state 1 (states 2..n1 have no exit of their own), so
    sojourns in high states produce the heavy tail.  T0 = (-tau' Q^{-1} 1) Q
    satisfies -tau' T0^{-1} 1 = 1.
    """
    if not (a > 1.0 and a > b > 0.0 and c > 0.0):
        raise GeneratorError("need a > 1, a > b > 0, c > 0")
    s_a = sum((1.0 / a) ** k for k in range(1, n1))
    q = np.zeros((n1, n1))
    q[0, 0] = -(c + s_a)
    for i in range(1, n1):
        q[0, i] = (1.0 / a) ** i
        q[i, 0] = (b / a) ** i
        q[i, i] = -((b / a) ** i)
    tau = np.zeros(n1)
    tau[0] = 1.0
    mean = float(-(tau @ LUSolver(q).solve(np.ones(n1))))
    t0 = mean * q
    return tau, t0


def gen_phph(spec: PhPhSpec, max_degree: int = 10 ** 5) -> MatrixPolynomial:
    """Build the queue-length block row A_{-1}, ..., A_{d-1} of the queue.

    A_h counts the probability of h + 1 arrival renewals during one
    service, tracking the arrival phase.  The series is cut at the first
    degree where the remaining tail's maximum row sum (known exactly from
    the geometric structure, max of E M1^{h+2} 1) is at or below
    trunc_tol, so the kept coefficients sum to a stochastic matrix up to
    that deficit.
    """
    n1, n2 = spec.n1, spec.n2
    beta, s_gen = erlang_ph(n2, spec.lam)
    tau, t0 = heavy_tail_ph(n1, spec.a, spec.b, spec.c)
    t_gen = spec.rho * t0
    t_exit = -t_gen @ np.ones(n1)
    s_exit = -s_gen @ np.ones(n2)
    size = n1 * n2
    ts = kron(t_gen, np.eye(n2), size_cap=size) + kron(np.eye(n1), s_gen, size_cap=size)
    neg_ts = LUSolver(-ts)
    m1 = neg_ts.solve(kron(np.outer(t_exit, tau), np.eye(n2), size_cap=size))
    m0 = neg_ts.solve(kron(np.eye(n1), np.outer(s_exit, beta), size_cap=size))
    extract = kron(np.eye(n1), beta.reshape(1, -1), size_cap=size)
    squash = kron(np.eye(n1), np.ones((n2, 1)), size_cap=size)
    coeffs = []
    acc = m0
    tail = np.ones(size)
    while True:
        coeffs.append(extract @ acc @ squash)
        tail = m1 @ tail
        if float((extract @ tail).max()) <= spec.trunc_tol:
            break
        if len(coeffs) >= max_degree:
            raise GeneratorError(
                f"series does not decay below {spec.trunc_tol} within "
                f"{max_degree} coefficients")
        acc = m1 @ acc
    return MatrixPolynomial(coeffs)
