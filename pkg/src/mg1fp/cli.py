"""Command-line interface.

Subcommands:

  gen synthetic | gen phph   write a benchmark model in MG1v1 format
  solve                      run one strategy, emit residual CSV + summary
  sweep                      run optimal:q over a q+1 range, emit a CSV table
  analyze                    emit rate/conditioning diagnostics as key=value

Exit codes: 0 on success (solves must have converged), 1 for a solver that
terminated without convergence, 2 for invalid parameters or inputs.  The
default output directory comes from $MG1FP_OUTDIR, falling back to the
current directory.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis
from .embedding import EmbeddingError, make_embedding, parse_strategy
from .generators import GeneratorError, PhPhSpec, SyntheticSpec, gen_phph, gen_synthetic
from .linalg import spectral_radius
from .model import (
    MatrixPolynomial,
    ModelError,
    drift,
    load_model,
    residual_delta,
    save_model,
    validate_model,
)
from .solver import CLASSICAL_VARIANTS, SolverError, StopConfig, classical_solve, outer_solve

USAGE_ERROR = 2
NOT_CONVERGED = 1


def _outdir(args) -> Path:
    base = args.outdir or os.environ.get("MG1FP_OUTDIR") or "."
    path = Path(base)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def save_matrix(mat: np.ndarray, path: Path) -> None:
    path.write_text(
        "\n".join(" ".join(f"{v:.16e}" for v in row) for row in mat) + "\n")


def load_matrix(path) -> np.ndarray:
    rows = [[float(tok) for tok in line.split()]
            for line in Path(path).read_text().splitlines()
            if line.strip() and not line.startswith("#")]
    return np.array(rows)


def _parse_x0(text: str, m: int) -> np.ndarray:
    if text == "zero":
        return np.zeros((m, m))
    if text == "identity":
        return np.eye(m)
    if text.startswith("file:"):
        x0 = load_matrix(text[5:])
        if x0.shape != (m, m):
            raise ModelError(f"X0 file has shape {x0.shape}, expected ({m}, {m})")
        rowsum_gap = float(np.abs(x0 @ np.ones(m) - 1.0).max())
        if x0.min() < 0.0 or rowsum_gap > 1e-10:
            raise ModelError(
                f"X0 file is not stochastic (min {x0.min():.3e}, "
                f"rowsum deviation {rowsum_gap:.3e})")
        return x0
    raise ModelError(f"unknown X0 choice {text!r} (zero | identity | file:PATH)")


def _stop_from_args(args) -> StopConfig:
    return StopConfig(epsilon=args.epsilon, max_outer=args.max_outer,
                      max_inner_per_outer=args.max_inner)


def _print_model_summary(model: MatrixPolynomial, path: Path) -> None:
    check = validate_model(model)
    lines = {
        "model": str(path),
        "m": model.m,
        "d": model.d,
        "stochastic": check.stochastic,
        "valid": check.valid,
        "rowsum_deviation": check.max_rowsum_deviation,
    }
    if check.stochastic:
        lines["drift"] = drift(model).mu
    sys.stdout.write(analysis.format_diagnostics(lines))


def cmd_gen(args) -> int:
    outdir = _outdir(args)
    try:
        if args.family == "synthetic":
            spec = SyntheticSpec(m=args.m, d=args.d, mu=args.mu, s1=args.s1,
                                 s2=args.s2, sigma=args.sigma, seed=args.seed)
            model = gen_synthetic(spec)
            default_name = f"synthetic_m{args.m}_d{args.d}.mg1"
        else:
            spec = PhPhSpec(n1=args.n1, n2=args.n2, lam=args.lam, a=args.a,
                            b=args.b, c=args.c, rho=args.rho,
                            trunc_tol=args.trunc_tol)
            model = gen_phph(spec)
            default_name = f"phph_n{args.n1}x{args.n2}_rho{args.rho}.mg1"
    except GeneratorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    path = Path(args.out) if args.out else outdir / default_name
    save_model(model, path)
    _print_model_summary(model, path)
    return 0


def cmd_solve(args) -> int:
    model = load_model(args.model)
    stop = _stop_from_args(args)
    x0 = _parse_x0(args.x0, model.m)
    spec = parse_strategy(args.strategy)
    name = spec["strategy"]
    outdir = _outdir(args)
    tag = args.tag or f"{Path(args.model).stem}_{args.strategy.replace(':', '-')}"
    csv_path = outdir / f"{tag}_residuals.csv"
    with csv_path.open("w") as fh:
        fh.write("k,delta,inner_iters\n")

        def trace(k, delta, inner_iters, elapsed):
            fh.write(f"{k},{_fmt(delta)},{inner_iters}\n")

        if name in CLASSICAL_VARIANTS:
            report = classical_solve(model, name, x0, stop=stop, trace=trace)
        else:
            emb = make_embedding(model, **spec)
            report = outer_solve(model, emb, x0, stop=stop, trace=trace)
    save_matrix(report.G, outdir / f"{tag}_G.txt")
    summary = {
        "model": args.model,
        "strategy": args.strategy,
        "x0": args.x0,
        "epsilon": stop.epsilon,
        "outer_iterations": report.outer_count,
        "inner_iterations_total": report.inner_total,
        "termination": report.termination,
        "stagnated_at_noise_floor": report.noise_floor,
        "final_residual": report.final_residual,
        "avg_rate": report.avg_rate if report.avg_rate is not None else "n/a",
        "wall_seconds": report.wall_time,
        "residual_csv": str(csv_path),
    }
    for warning in report.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    text = analysis.format_diagnostics(summary)
    (outdir / f"{tag}_summary.txt").write_text(text)
    sys.stdout.write(text)
    return 0 if report.converged else NOT_CONVERGED


def cmd_sweep(args) -> int:
    model = load_model(args.model)
    stop = _stop_from_args(args)
    x0 = _parse_x0(args.x0, model.m)
    if args.qmin < 2 or args.qmax > model.d or args.qmin > args.qmax:
        print(f"error: q+1 range [{args.qmin}, {args.qmax}] outside [2, d={model.d}]",
              file=sys.stderr)
        return USAGE_ERROR
    outdir = _outdir(args)
    tag = args.tag or f"{Path(args.model).stem}_sweep"
    csv_path = outdir / f"{tag}.csv"
    all_ok = True
    with csv_path.open("w") as fh:
        fh.write("q_plus_1,outer,inner_total,cpu_seconds,final_residual\n")
        if args.classical:
            for variant in CLASSICAL_VARIANTS:
                t0 = time.perf_counter()
                report = classical_solve(model, variant, x0, stop=stop)
                elapsed = time.perf_counter() - t0
                fh.write(f"{variant},{report.outer_count},{report.inner_total},"
                         f"{_fmt(elapsed)},{_fmt(report.final_residual)}\n")
                all_ok = all_ok and report.converged
        for q_plus_1 in range(args.qmin, args.qmax + 1):
            emb = make_embedding(model, "optimal", q=q_plus_1 - 1)
            t0 = time.perf_counter()
            try:
                report = outer_solve(model, emb, x0, stop=stop)
            except SolverError as exc:
                elapsed = time.perf_counter() - t0
                print(f"warning: q+1={q_plus_1} failed: {exc}", file=sys.stderr)
                fh.write(f"{q_plus_1},-1,-1,{_fmt(elapsed)},nan\n")
                all_ok = False
                continue
            elapsed = time.perf_counter() - t0
            fh.write(f"{q_plus_1},{report.outer_count},{report.inner_total},"
                     f"{_fmt(elapsed)},{_fmt(report.final_residual)}\n")
            all_ok = all_ok and report.converged
    print(f"sweep written to {csv_path}")
    return 0 if all_ok else NOT_CONVERGED


def cmd_analyze(args) -> int:
    model = load_model(args.model)
    spec = parse_strategy(args.strategy)
    emb = make_embedding(model, **spec)
    entries: dict = {"model": args.model, "strategy": args.strategy}
    converged = True
    if args.g:
        g = load_matrix(args.g)
    else:
        stop = _stop_from_args(args)
        report = classical_solve(model, "ubased", np.zeros((model.m, model.m)),
                                 stop=stop)
        converged = report.converged
        g = report.G
        entries["g_solver"] = "ubased"
        entries["g_termination"] = report.termination
    entries["g_residual"] = residual_delta(model, g)
    try:
        entries["mu"] = drift(model).mu
    except ModelError as exc:
        entries["mu_error"] = str(exc)

    def attempt(key, fn):
        try:
            entries[key] = fn()
        except analysis.AnalysisError as exc:
            entries[f"{key}_error"] = str(exc)

    _, v_mat, _ = analysis.star_matrices(model, g)
    entries["rho_V"] = spectral_radius(v_mat)
    rates = {}

    def rate_pair():
        report = analysis.convergence_rate(emb, model, g)
        rates["report"] = report
        return report.rho_MinvN

    attempt("rho_MinvN", rate_pair)
    if "report" in rates:
        entries["rho_HinvN"] = rates["report"].rho_HinvN
        entries["rho_HinvN_identity_residual"] = rates["report"].identity_gap
    attempt("xi", lambda: analysis.xi_root(model, g))
    attempt("xi_q", lambda: analysis.xi_q_root(emb, g))
    if model.m <= analysis.KRON_GUARD:
        def kron_pair():
            kr = analysis.kron_rate(emb, g)
            if "rho_MinvN" in entries:
                entries["abs_rho_W_minus_rho_MinvN"] = abs(
                    kr.rho_W - entries["rho_MinvN"])
            return kr.rho_W

        attempt("rho_W", kron_pair)
    else:
        entries["rho_W_error"] = f"m = {model.m} above the guard {analysis.KRON_GUARD}"
    text = analysis.format_diagnostics(entries)
    outdir = _outdir(args)
    tag = args.tag or f"{Path(args.model).stem}_{args.strategy.replace(':', '-')}_analysis"
    (outdir / f"{tag}.txt").write_text(text)
    sys.stdout.write(text)
    return 0 if converged else NOT_CONVERGED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mg1fp",
        description="Fixed-point solvers for M/G/1-type matrix equations")
    parser.add_argument("--outdir", help="output directory "
                        "(default: $MG1FP_OUTDIR or the current directory)")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a benchmark model")
    fam = gen.add_subparsers(dest="family", required=True)
    syn = fam.add_parser("synthetic", help="circulant family with given drift")
    syn.add_argument("--m", type=int, required=True)
    syn.add_argument("--d", type=int, required=True)
    syn.add_argument("--mu", type=float, required=True)
    syn.add_argument("--s1", type=float, default=0.6)
    syn.add_argument("--s2", type=float, default=0.9995)
    syn.add_argument("--sigma", type=float, default=0.0)
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--out")
    syn.set_defaults(func=cmd_gen)
    php = fam.add_parser("phph", help="PH/PH/1 queue block row")
    php.add_argument("--n1", type=int, default=10)
    php.add_argument("--n2", type=int, default=10)
    php.add_argument("--lambda", dest="lam", type=float, default=10.0)
    php.add_argument("--a", type=float, default=2.0)
    php.add_argument("--b", type=float, default=1.0)
    php.add_argument("--c", type=float, default=1.5)
    php.add_argument("--rho", type=float, default=0.85)
    php.add_argument("--trunc-tol", type=float, default=1e-16)
    php.add_argument("--out")
    php.set_defaults(func=cmd_gen)

    def common_solver_args(p):
        p.add_argument("model", help="MG1v1 model file")
        p.add_argument("--x0", default="zero",
                       help="zero | identity | file:PATH (stochastic matrix)")
        p.add_argument("--epsilon", type=float, default=1e-15)
        p.add_argument("--max-outer", type=int, default=10 ** 6)
        p.add_argument("--max-inner", type=int, default=10 ** 5)
        p.add_argument("--tag", help="basename for output files")

    slv = sub.add_parser("solve", help="solve one model with one strategy")
    common_solver_args(slv)
    slv.add_argument("--strategy", default="ubased",
                     help="natural | traditional | ubased | optimal:<q> | mass:<ell>:<q>")
    slv.set_defaults(func=cmd_solve)

    swp = sub.add_parser("sweep", help="optimal:q sweep over a q+1 range")
    common_solver_args(swp)
    swp.add_argument("--qmin", type=int, default=2, help="smallest q+1")
    swp.add_argument("--qmax", type=int, default=9, help="largest q+1")
    swp.add_argument("--classical", action="store_true",
                     help="prepend natural/traditional/ubased baseline rows")
    swp.set_defaults(func=cmd_sweep)

    ana = sub.add_parser("analyze", help="rate and conditioning diagnostics")
    common_solver_args(ana)
    ana.add_argument("--strategy", default="ubased")
    ana.add_argument("--g", help="file with a precomputed solution matrix")
    ana.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ModelError, EmbeddingError, GeneratorError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (SolverError, analysis.AnalysisError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return NOT_CONVERGED
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
