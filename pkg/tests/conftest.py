"""Shared fixtures: hand-checked scalar models and random model factories."""

from __future__ import annotations

import numpy as np
import pytest

from mg1fp import MatrixPolynomial, PhPhSpec, classical_solve, drift, gen_phph
from mg1fp.solver import StopConfig


@pytest.fixture
def scalar_recurrent() -> MatrixPolynomial:
    """m=1 chain with coefficients (0.6, 0.1, 0.3): drift -0.3, G = 1.

    Fixed points solve 0.3 g^2 - 0.9 g + 0.6 = 0, roots {1, 2}; the
    minimal nonnegative solution is 1.
    """
    return MatrixPolynomial([[[0.6]], [[0.1]], [[0.3]]])


@pytest.fixture
def scalar_transient() -> MatrixPolynomial:
    """m=1 chain with coefficients (0.3, 0.1, 0.6): drift +0.3, G = 0.5.

    Fixed points solve 0.6 g^2 - 0.9 g + 0.3 = 0, roots {0.5, 1}.
    """
    return MatrixPolynomial([[[0.3]], [[0.1]], [[0.6]]])


@pytest.fixture(scope="session")
def phph_model() -> MatrixPolynomial:
    return gen_phph(PhPhSpec())


def random_stochastic_model(rng, m: int, d: int, drift_lo: float = -0.6,
                            drift_hi: float = -0.02, tries: int = 400) -> MatrixPolynomial:
    """Random dense stochastic model with drift inside [drift_lo, drift_hi].

    Coefficients decay geometrically with the jump size and the down-jump
    block is upweighted, then rows are normalized so the coefficient sum
    is exactly stochastic; rejection sampling hits the drift window.
    """
    for _ in range(tries):
        decay = rng.uniform(0.3, 0.8)
        boost = rng.uniform(1.0, 4.0)
        coeffs = [rng.random((m, m)) * decay ** (i + 1) for i in range(-1, d)]
        coeffs[0] = coeffs[0] * boost
        rowsum = np.zeros(m)
        for c in coeffs:
            rowsum += c @ np.ones(m)
        coeffs = [c / rowsum[:, None] for c in coeffs]
        model = MatrixPolynomial(coeffs)
        mu = drift(model).mu
        if drift_lo <= mu <= drift_hi:
            return model
    raise RuntimeError(f"no model with drift in [{drift_lo}, {drift_hi}] "
                       f"after {tries} tries")


def random_substochastic_model(rng, m: int, d: int) -> MatrixPolynomial:
    """Random model whose coefficient sum has row sums strictly below 1."""
    base = random_stochastic_model(rng, m, d)
    shrink = rng.uniform(0.88, 0.98)
    return MatrixPolynomial([c * shrink for c in base.coeffs])


def solve_g(model: MatrixPolynomial, epsilon: float = 1e-15) -> np.ndarray:
    """Reference solution by the classical U-based iteration from zero."""
    report = classical_solve(model, "ubased", np.zeros((model.m, model.m)),
                             stop=StopConfig(epsilon=epsilon))
    assert report.converged, f"reference solve failed: {report.termination}"
    return report.G
