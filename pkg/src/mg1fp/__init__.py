"""Fixed-point solvers for the minimal nonnegative solution G of
X = sum_{i=-1}^{d-1} A_i X^{i+1}, the matrix equation of M/G/1-type
Markov chains, together with rate diagnostics and benchmark generators."""

from .embedding import Embedding, make_embedding, parse_strategy, validate_embedding
from .generators import PhPhSpec, SyntheticSpec, gen_phph, gen_synthetic, heavy_tail_ph
from .model import (
    MatrixPolynomial,
    drift,
    eval_poly,
    load_model,
    residual_delta,
    save_model,
    validate_model,
)
from .solver import (
    SolveReport,
    StopConfig,
    classical_solve,
    inner_solve,
    outer_solve,
    solve,
)

__all__ = [
    "Embedding",
    "MatrixPolynomial",
    "PhPhSpec",
    "SolveReport",
    "StopConfig",
    "SyntheticSpec",
    "classical_solve",
    "drift",
    "eval_poly",
    "gen_phph",
    "gen_synthetic",
    "heavy_tail_ph",
    "inner_solve",
    "load_model",
    "make_embedding",
    "outer_solve",
    "parse_strategy",
    "residual_delta",
    "save_model",
    "solve",
    "validate_embedding",
    "validate_model",
]

__version__ = "0.1.0"
