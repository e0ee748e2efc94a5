"""Fixed-point solvers for X = sum_{i=-1}^{d-1} A_i X^{i+1}.

Two entry points:

* classical_solve runs the Natural, Traditional or U-based recurrence
  directly, one linear solve (at most) per step.
* outer_solve runs the embedded two-level scheme: at outer step k the
  embedding's coefficients are evaluated at X_k, and the resulting matrix
  polynomial equation of degree q+1 is solved approximately by the U-based
  functional iteration (the inner iteration), warm-started at Z_0 = X_k.

Stopping follows the residual rules used throughout the experiments: the
outer loop ends when delta_k = (1/m)||X_k - A(X_k)||_inf drops below
epsilon, or when delta_k > delta_{k-1} * (1 + 1e-3) (stagnation), or at the
iteration cap.  The inner tolerance is max(delta_k / 10, 4u, epsilon / 4)
with u the unit roundoff; when the embedded equation does not depend on the
iterate at all (q = d - 1), the inner solve targets epsilon directly so a
single outer step suffices.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .embedding import Embedding, eval_coefficient, make_embedding
from .linalg import LUSolver, UNIT_ROUNDOFF, as_matrix, horner, inf_norm
from .model import MatrixPolynomial, eval_poly

CLASSICAL_VARIANTS = ("natural", "traditional", "ubased")

#: Stagnation exits with a residual at or below this multiple of epsilon
#: count as converged (noise floor), matching the observed 1e-15-scale
#: final residuals.
NOISE_FLOOR_FACTOR = 10.0

#: Entrywise slack before a decreasing step from X0 = 0 draws a warning.
MONOTONE_SLACK = 1e-12


class SolverError(Exception):
    """Raised when an iteration cannot proceed (singular system, bad input)."""


@dataclass(frozen=True)
class StopConfig:
    """Stopping-rule constants for both iteration levels."""

    epsilon: float = 1e-15
    unit_roundoff: float = UNIT_ROUNDOFF
    divergence_factor: float = 1.0 + 1e-3
    max_outer: int = 10 ** 6
    max_inner_per_outer: int = 10 ** 5

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.divergence_factor <= 1.0:
            raise ValueError("divergence_factor must exceed 1")

    def inner_tolerance(self, delta: float, constant_equation: bool) -> float:
        if constant_equation:
            return max(self.epsilon, 4.0 * self.unit_roundoff)
        return max(delta / 10.0, 4.0 * self.unit_roundoff, self.epsilon / 4.0)


@dataclass(frozen=True)
class SolveReport:
    """Outcome of a solve: the iterate, per-step counts and diagnostics.

    termination is one of "converged", "stagnated", "max_iterations";
    noise_floor marks a stagnation exit whose final residual was within
    NOISE_FLOOR_FACTOR * epsilon and was therefore reported as converged.
    avg_rate is (delta_k / delta_0)^(1/k), the geometric-mean residual
    reduction per outer step.
    """

    G: np.ndarray
    outer_count: int
    inner_counts: tuple
    residual_history: tuple
    termination: str
    noise_floor: bool = False
    avg_rate: float | None = None
    warnings: tuple = ()
    wall_time: float = 0.0

    @property
    def converged(self) -> bool:
        return self.termination == "converged"

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1]

    @property
    def inner_total(self) -> int:
        return int(sum(self.inner_counts))


@dataclass(frozen=True)
class InnerResult:
    z: np.ndarray
    iterations: int
    converged: bool
    residual: float
    stagnated: bool = False


TraceFn = Callable[[int, float, int, float], None]


def _inner_iterate(coeffs: Sequence[np.ndarray], z0: np.ndarray, tol: float,
                   stop: StopConfig) -> InnerResult:
    """U-based functional iteration on Z = C_{-1} + sum_{l>=0} C_l Z^{l+1}.

    Z_{v+1} = (I - sum_{l=0}^{q} C_l Z_v^l)^{-1} C_{-1}, stopping on the
    scaled residual dropping below tol, on stagnation, or at the cap.
    The returned iteration count is the number of passes through the loop;
    each pass evaluates the current iterate's residual and, unless it
    terminates, performs one linear solve.
    """
    m = z0.shape[0]
    eye = np.eye(m)
    const = coeffs[0]
    higher = coeffs[1:]
    z = z0
    prev_r = None
    passes = 0
    updates = 0
    while True:
        passes += 1
        k_mat = horner(higher, z)
        # Associate as const + K z so the value agrees bitwise with a full
        # Horner pass of the same coefficients at the same argument.
        r = inf_norm(z - (const + k_mat @ z)) / m
        if r < tol:
            return InnerResult(z, passes, True, r)
        if prev_r is not None and r > prev_r * stop.divergence_factor:
            return InnerResult(z, passes, False, r, stagnated=True)
        if updates >= stop.max_inner_per_outer:
            return InnerResult(z, passes, False, r)
        prev_r = r
        try:
            z = LUSolver(eye - k_mat).solve(const)
        except Exception as exc:
            raise SolverError(f"inner linear system is singular: {exc}") from exc
        updates += 1


def inner_solve(emb: Embedding, tail_value: np.ndarray, z0: np.ndarray,
                tol: float, stop: StopConfig | None = None) -> InnerResult:
    """Solve the degree-(q+1) equation whose tail owner is already evaluated.

    tail_value must be A_{l*}(X_k) for the embedding's tail owner l*; the
    remaining coefficients are the embedding's stored constants.
    """
    stop = stop or StopConfig()
    z0 = as_matrix(z0, "Z0")
    coeffs = []
    for l in range(-1, emb.q + 1):
        if l == emb.tail_owner:
            coeffs.append(as_matrix(tail_value, "tail value"))
        else:
            coeffs.append(emb.coeff_series(l)[0])
    return _inner_iterate(coeffs, z0, tol, stop)


def _check_x0(x0, m: int) -> np.ndarray:
    x0 = as_matrix(x0, "X0")
    if x0.shape != (m, m):
        raise SolverError(f"X0 has shape {x0.shape}, expected ({m}, {m})")
    return x0


def _canonical_tail_layout(emb: Embedding, model: MatrixPolynomial) -> bool:
    """True when the tail owner is q and every stored piece is the matching
    original coefficient, so the full-polynomial Horner pass contains the
    evaluated tail (natural / ubased / optimal layouts)."""
    if emb.tail_owner != emb.q:
        return False
    tail = emb.coeff_series(emb.q)
    if len(tail) != model.d - emb.q:
        return False
    if any(not np.array_equal(tail[i], model.coeff(emb.q + i))
           for i in range(len(tail))):
        return False
    for l in range(-1, emb.q):
        series = emb.coeff_series(l)
        if len(series) != 1 or not np.array_equal(series[0], model.coeff(l)):
            return False
    return True


def _horner_with_capture(coeffs: Sequence[np.ndarray], x: np.ndarray,
                         capture_power: int):
    """Full Horner pass returning (A(X), tail accumulator at capture_power).

    The captured value is sum_{j >= p} A_{j-1} X^{j-p} for p = capture_power,
    i.e. the evaluated series coefficient whose tail starts at A_{p-1}; it is
    zero when the polynomial has no terms of degree >= p.
    """
    acc = np.array(coeffs[-1], copy=True)
    if capture_power >= len(coeffs):
        captured = np.zeros_like(acc)
    else:
        captured = acc if capture_power == len(coeffs) - 1 else None
    for power in range(len(coeffs) - 2, -1, -1):
        acc = coeffs[power] + acc @ x
        if power == capture_power:
            captured = acc
    return acc, captured


def _run_outer(measure, update, x0: np.ndarray, stop: StopConfig,
               trace: TraceFn | None, monotone_check: bool) -> SolveReport:
    """Shared outer loop: measure the residual, stop or advance."""
    t0 = time.perf_counter()
    x = x0
    history: list[float] = []
    inner_counts: list[int] = []
    warnings: list[str] = []
    prev_delta = None
    noise_floor = False
    k = 0
    while True:
        delta, ctx = measure(x)
        history.append(delta)
        if trace is not None:
            trace(k, delta, inner_counts[-1] if k else 0, time.perf_counter() - t0)
        if delta < stop.epsilon:
            termination = "converged"
            break
        if prev_delta is not None and delta > prev_delta * stop.divergence_factor:
            if delta <= NOISE_FLOOR_FACTOR * stop.epsilon:
                termination = "converged"
                noise_floor = True
            else:
                termination = "stagnated"
            break
        if k >= stop.max_outer:
            termination = "max_iterations"
            break
        x_next, inner_used = update(x, ctx, delta)
        if monotone_check and float((x_next - x).min()) < -MONOTONE_SLACK:
            msg = f"non-monotone step at k={k}: min increment {(x_next - x).min():.3e}"
            if not warnings:
                warnings.append(msg)
        inner_counts.append(inner_used)
        if np.array_equal(x_next, x):
            # The inner solve cannot improve the iterate (noise floor).
            history.append(delta)
            k += 1
            if trace is not None:
                trace(k, delta, inner_used, time.perf_counter() - t0)
            if delta <= NOISE_FLOOR_FACTOR * stop.epsilon:
                termination = "converged"
                noise_floor = True
            else:
                termination = "stagnated"
            break
        prev_delta = delta
        x = x_next
        k += 1
    avg_rate = None
    if k >= 1 and history[0] > 0.0:
        avg_rate = float((history[-1] / history[0]) ** (1.0 / k))
    return SolveReport(
        G=x,
        outer_count=k,
        inner_counts=tuple(inner_counts),
        residual_history=tuple(history),
        termination=termination,
        noise_floor=noise_floor,
        avg_rate=avg_rate,
        warnings=tuple(warnings),
        wall_time=time.perf_counter() - t0,
    )


def classical_solve(model: MatrixPolynomial, variant: str, x0,
                    stop: StopConfig | None = None,
                    trace: TraceFn | None = None) -> SolveReport:
    """Run one of the classical recurrences.

    natural      X_{k+1} = sum_i A_{i-1} X_k^i
    traditional  (I - A_0) X_{k+1} = A_{-1} + sum_{i>=2} A_{i-1} X_k^i
    ubased       (I - sum_{i>=0} A_i X_k^i) X_{k+1} = A_{-1}

    X0 should be zero or stochastic for the convergence guarantees to
    apply; this is not enforced.
    """
    if variant not in CLASSICAL_VARIANTS:
        raise SolverError(f"unknown classical variant {variant!r}")
    stop = stop or StopConfig()
    m = model.m
    x0 = _check_x0(x0, m)
    monotone = not np.any(x0)
    const = model.coeff(-1)

    if variant == "natural":
        def measure(x):
            ax = eval_poly(model, x)
            return inf_norm(x - ax) / m, ax

        def update(x, ax, delta):
            return ax, 1

    elif variant == "traditional":
        a0 = model.coeff(0) if model.d >= 1 else np.zeros((m, m))
        try:
            factor = LUSolver(np.eye(m) - a0)
        except Exception as exc:
            raise SolverError(f"I - A_0 is singular: {exc}") from exc
        # A_0 zeroed out: Horner gives W(X) = A_{-1} + sum_{i>=2} A_{i-1} X^i.
        coeffs = [const] + [np.zeros((m, m))] + [model.coeff(i) for i in range(1, model.d)]

        def measure(x):
            w = horner(coeffs, x)
            ax = w + a0 @ x
            return inf_norm(x - ax) / m, w

        def update(x, w, delta):
            return factor.solve(w), 1

    else:  # ubased
        higher = model.coeffs[1:]
        eye = np.eye(m)

        def measure(x):
            u = horner(higher, x) if higher else np.zeros((m, m))
            ax = const + u @ x
            return inf_norm(x - ax) / m, u

        def update(x, u, delta):
            try:
                return LUSolver(eye - u).solve(const), 1
            except Exception as exc:
                raise SolverError(f"I - sum A_i X^i is singular: {exc}") from exc

    return _run_outer(measure, update, x0, stop, trace, monotone)


def outer_solve(model: MatrixPolynomial, emb: Embedding, x0,
                stop: StopConfig | None = None,
                trace: TraceFn | None = None) -> SolveReport:
    """Two-level solve of the model through the given embedding.

    Each outer step evaluates the embedding's series coefficients at X_k
    (one Horner pass over the stored tail) and delegates the degree-(q+1)
    equation to the inner U-based iteration with warm start Z_0 = X_k.
    The residual driving the stopping rules is always that of the original
    equation.
    """
    stop = stop or StopConfig()
    m = model.m
    if emb.m != m:
        raise SolverError(f"embedding block size {emb.m} != model block size {m}")
    x0 = _check_x0(x0, m)
    monotone = not np.any(x0)
    constant_eq = emb.constant
    consts = {l: emb.coeff_series(l)[0] for l in range(-1, emb.q + 1)
              if l != emb.tail_owner}
    owner = emb.tail_owner

    # For the canonical owner-at-q layouts the original-polynomial Horner
    # pass contains the evaluated tail coefficient, so one pass serves both
    # the residual and the inner coefficients.
    shared_pass = _canonical_tail_layout(emb, model)

    if shared_pass:
        capture_power = owner + 1

        def measure(x):
            ax, tail_val = _horner_with_capture(model.coeffs, x, capture_power)
            return inf_norm(x - ax) / m, tail_val

    else:
        def measure(x):
            tail_val = eval_coefficient(emb, owner, x)
            ax = eval_poly(model, x)
            return inf_norm(x - ax) / m, tail_val

    def update(x, tail_val, delta):
        coeffs = [tail_val if l == owner else consts[l]
                  for l in range(-1, emb.q + 1)]
        tol = stop.inner_tolerance(delta, constant_eq)
        result = _inner_iterate(coeffs, x, tol, stop)
        return result.z, result.iterations

    return _run_outer(measure, update, x0, stop, trace, monotone)


def solve(model: MatrixPolynomial, strategy: str = "ubased", x0=None,
          stop: StopConfig | None = None, trace: TraceFn | None = None,
          **strategy_kwargs) -> SolveReport:
    """Convenience wrapper: classical variants run directly, others embed."""
    if x0 is None:
        x0 = np.zeros((model.m, model.m))
    if strategy in CLASSICAL_VARIANTS and not strategy_kwargs:
        return classical_solve(model, strategy, x0, stop=stop, trace=trace)
    emb = make_embedding(model, strategy, **strategy_kwargs)
    return outer_solve(model, emb, x0, stop=stop, trace=trace)
