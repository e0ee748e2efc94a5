"""Analysis tests: star matrices, splittings, rates, roots, Kronecker form."""

import math

import numpy as np
import pytest

from mg1fp import MatrixPolynomial, classical_solve, make_embedding
from mg1fp.analysis import (
    AnalysisError,
    bstar_matrices,
    convergence_rate,
    fmn,
    format_diagnostics,
    kron_rate,
    rate_estimates,
    sq_factorization_gap,
    star_matrices,
    xi_q_root,
    xi_root,
)
from mg1fp.linalg import inf_norm, solve_linear, spectral_radius
from mg1fp.solver import StopConfig
from tests.conftest import random_stochastic_model, solve_g


@pytest.fixture
def scalar_setup(scalar_recurrent):
    return scalar_recurrent, solve_g(scalar_recurrent)


def all_embeddings(model):
    embs = [make_embedding(model, "natural"),
            make_embedding(model, "traditional"),
            make_embedding(model, "ubased")]
    for q in range(1, model.d):
        embs.append(make_embedding(model, "optimal", q=q))
    return embs


class TestStarMatrices:
    def test_scalar_back_substitution(self, scalar_setup):
        # A_1^* = 0.3; A_0^* = 0.1 + 0.3 * 1 = 0.4; V = 0.7; H = 0.3.
        model, g = scalar_setup
        astar, v, h = star_matrices(model, g)
        assert astar[0][0, 0] == pytest.approx(0.4, abs=1e-12)
        assert astar[1][0, 0] == pytest.approx(0.3, abs=1e-12)
        assert v[0, 0] == pytest.approx(0.7, abs=1e-12)
        assert h[0, 0] == pytest.approx(0.3, abs=1e-12)

    def test_degree_zero(self):
        model = MatrixPolynomial([np.array([[0.4, 0.6], [0.5, 0.5]])])
        astar, v, h = star_matrices(model, model.coeff(-1))
        assert astar == ()
        assert np.array_equal(v, np.zeros((2, 2)))
        assert np.array_equal(h, np.eye(2))

    def test_rho_v_below_one_when_recurrent(self):
        rng = np.random.Generator(np.random.Philox(53))
        for _ in range(10):
            model = random_stochastic_model(rng, int(rng.integers(1, 5)),
                                            int(rng.integers(1, 6)))
            _, v, _ = star_matrices(model, solve_g(model))
            assert spectral_radius(v) < 1.0


class TestFMN:
    def test_natural_has_zero_f(self, scalar_setup):
        model, g = scalar_setup
        f, m_mat, n_mat = fmn(make_embedding(model, "natural"), g)
        assert np.array_equal(f, np.zeros((1, 1)))
        assert np.array_equal(m_mat, np.eye(1))

    def test_scalar_ubased_values(self, scalar_setup):
        # F = sum A_i G^i = 0.4; N = A_{0,1} * G^0 = 0.3.
        model, g = scalar_setup
        f, m_mat, n_mat = fmn(make_embedding(model, "ubased"), g)
        assert f[0, 0] == pytest.approx(0.4, abs=1e-12)
        assert m_mat[0, 0] == pytest.approx(0.6, abs=1e-12)
        assert n_mat[0, 0] == pytest.approx(0.3, abs=1e-12)

    def test_splitting_identity_all_strategies(self):
        rng = np.random.Generator(np.random.Philox(59))
        for _ in range(8):
            model = random_stochastic_model(rng, int(rng.integers(1, 5)),
                                            int(rng.integers(2, 6)))
            g = solve_g(model)
            _, _, h = star_matrices(model, g)
            for emb in all_embeddings(model):
                f, m_mat, n_mat = fmn(emb, g)
                assert inf_norm((m_mat - n_mat) - h) <= 1e-12


class TestConvergenceRate:
    def test_scalar_value_and_identity(self, scalar_setup):
        model, g = scalar_setup
        report = convergence_rate(make_embedding(model, "ubased"), model, g)
        assert report.rho_MinvN == pytest.approx(0.5, abs=1e-12)
        assert report.rho_HinvN == pytest.approx(1.0, abs=1e-10)
        assert report.identity_gap <= 1e-9

    def test_natural_rate_is_rho_n(self, scalar_setup):
        model, g = scalar_setup
        emb = make_embedding(model, "natural")
        report = convergence_rate(emb, model, g)
        _, _, n_mat = fmn(emb, g)
        assert report.rho_MinvN == pytest.approx(spectral_radius(n_mat), abs=1e-12)

    def test_orderings_across_strategies(self):
        rng = np.random.Generator(np.random.Philox(61))
        for _ in range(8):
            model = random_stochastic_model(rng, int(rng.integers(1, 5)),
                                            int(rng.integers(3, 6)))
            g = solve_g(model)
            rates = [convergence_rate(e, model, g).rho_MinvN
                     for e in all_embeddings(model)]
            for a, b in zip(rates, rates[1:]):
                assert b <= a + 1e-10

    def test_f_monotonicity_implies_rate_ordering(self):
        rng = np.random.Generator(np.random.Philox(67))
        model = random_stochastic_model(rng, 3, 4)
        g = solve_g(model)
        embs = all_embeddings(model)
        for e1 in embs:
            f1 = fmn(e1, g)[0]
            r1 = convergence_rate(e1, model, g).rho_MinvN
            for e2 in embs:
                f2 = fmn(e2, g)[0]
                if np.all(f1 >= f2 - 1e-14):
                    r2 = convergence_rate(e2, model, g).rho_MinvN
                    assert r1 <= r2 + 1e-10


class TestXiRoots:
    def test_scalar_oracle(self, scalar_setup):
        # det S(z) = 0 at z in {1, 2} (the quadratic -0.3 z^2 + 0.9 z - 0.6),
        # so the smallest root outside the unit disk is 2.
        model, g = scalar_setup
        assert xi_root(model, g) == pytest.approx(2.0, abs=1e-10)

    def test_xi_above_one_for_recurrent_models(self):
        rng = np.random.Generator(np.random.Philox(71))
        for _ in range(8):
            model = random_stochastic_model(rng, int(rng.integers(1, 4)),
                                            int(rng.integers(2, 6)))
            assert xi_root(model, solve_g(model)) > 1.0

    def test_xi_q_matches_xi_at_top_degree(self, scalar_setup):
        model, g = scalar_setup
        emb = make_embedding(model, "optimal", q=model.d - 1)
        assert xi_q_root(emb, g) == pytest.approx(xi_root(model, g), abs=1e-10)

    def test_xi_q_nonincreasing_and_above_xi(self):
        rng = np.random.Generator(np.random.Philox(73))
        for _ in range(6):
            model = random_stochastic_model(rng, int(rng.integers(1, 4)),
                                            int(rng.integers(3, 6)))
            g = solve_g(model)
            xi = xi_root(model, g)
            values = []
            for q in range(1, model.d):
                xi_q = xi_q_root(make_embedding(model, "optimal", q=q), g)
                assert xi_q >= xi - 1e-9
                values.append(xi_q)
            for a, b in zip(values, values[1:]):
                assert b <= a + 1e-9

    def test_q0_has_no_root(self, scalar_setup):
        model, g = scalar_setup
        assert xi_q_root(make_embedding(model, "ubased"), g) == math.inf

    def test_tail_in_constant_rejected(self, scalar_setup):
        model, g = scalar_setup
        with pytest.raises(AnalysisError):
            xi_q_root(make_embedding(model, "traditional"), g)
        with pytest.raises(AnalysisError):
            xi_q_root(make_embedding(model, "natural"), g)

    def test_transient_model_has_no_outside_root(self, scalar_transient):
        # Roots of det S(z) are {0.5, 1}: nothing beyond the unit circle.
        g = solve_g(scalar_transient)
        with pytest.raises(AnalysisError):
            xi_root(scalar_transient, g)

    def test_companion_guard(self):
        rng = np.random.Generator(np.random.Philox(79))
        model = random_stochastic_model(rng, 6, 5)
        g = solve_g(model)
        from mg1fp import analysis
        old = analysis.COMPANION_GUARD
        analysis.COMPANION_GUARD = 10
        try:
            with pytest.raises(AnalysisError):
                xi_root(model, g)
        finally:
            analysis.COMPANION_GUARD = old


class TestBstar:
    def test_b0_equals_a0_star_and_domination(self):
        rng = np.random.Generator(np.random.Philox(83))
        for _ in range(6):
            model = random_stochastic_model(rng, int(rng.integers(1, 4)),
                                            int(rng.integers(3, 6)))
            g = solve_g(model)
            astar, _, _ = star_matrices(model, g)
            for q in range(1, model.d):
                bstar = bstar_matrices(make_embedding(model, "optimal", q=q), g)
                assert inf_norm(bstar[0] - astar[0]) <= 1e-12
                for i in range(1, q + 1):
                    assert np.all(bstar[i] <= astar[i] + 1e-12)

    def test_factorization_at_sample_points(self):
        rng = np.random.Generator(np.random.Philox(89))
        for _ in range(5):
            model = random_stochastic_model(rng, int(rng.integers(1, 4)),
                                            int(rng.integers(2, 6)))
            g = solve_g(model)
            for q in range(1, model.d):
                emb = make_embedding(model, "optimal", q=q)
                for z0 in (0.5, 1.0, 2.0):
                    assert sq_factorization_gap(emb, g, z0) <= 1e-11


class TestKronRate:
    def test_scalar_w_equals_iteration_matrix(self, scalar_setup):
        model, g = scalar_setup
        emb = make_embedding(model, "ubased")
        kr = kron_rate(emb, g)
        f, m_mat, n_mat = fmn(emb, g)
        expected = solve_linear(m_mat, n_mat)[0, 0]
        assert kr.W[0, 0] == pytest.approx(expected, abs=1e-13)
        assert kr.rho_W == pytest.approx(0.5, abs=1e-12)

    def test_matches_rho_minv_n_on_small_models(self):
        rng = np.random.Generator(np.random.Philox(97))
        for _ in range(6):
            model = random_stochastic_model(rng, int(rng.integers(1, 5)),
                                            int(rng.integers(2, 5)))
            g = solve_g(model)
            for emb in all_embeddings(model):
                kr = kron_rate(emb, g)
                rho = convergence_rate(emb, model, g).rho_MinvN
                assert abs(kr.rho_W - rho) <= 1e-8
                assert spectral_radius(kr.Q_GG) < 1.0

    def test_size_guard(self):
        model = MatrixPolynomial([np.eye(31) / 31, np.eye(31) * (30 / 31)])
        emb = make_embedding(model, "ubased")
        with pytest.raises(AnalysisError):
            kron_rate(emb, np.eye(31))


class TestRateEstimates:
    def test_bundle_consistency(self, scalar_setup):
        model, g = scalar_setup
        est = rate_estimates(model, make_embedding(model, "optimal", q=1), g)
        assert est.rho_MinvN <= est.rho_HinvN
        assert inf_norm((est.M - est.N) - est.H) <= 1e-12
        assert est.xi == pytest.approx(2.0, abs=1e-10)
        assert est.xi_q == pytest.approx(2.0, abs=1e-10)

    def test_xi_q_none_for_traditional(self, scalar_setup):
        model, g = scalar_setup
        est = rate_estimates(model, make_embedding(model, "traditional"), g)
        assert est.xi_q is None


class TestEmpiricalRateBound:
    def test_avg_rate_below_rho(self):
        # Slowly converging scalar model: drift -0.02 gives hundreds of steps.
        model = MatrixPolynomial([[[0.46]], [[0.1]], [[0.44]]])
        report = classical_solve(model, "ubased", np.zeros((1, 1)),
                                 stop=StopConfig(epsilon=1e-15))
        assert report.converged and report.outer_count >= 50
        rho = convergence_rate(make_embedding(model, "ubased"), model,
                               report.G).rho_MinvN
        assert report.avg_rate <= rho + 0.02


class TestFormatDiagnostics:
    def test_key_value_lines(self):
        text = format_diagnostics({"mu": -0.25, "note": "ok"})
        assert text == "mu = -0.25\nnote = ok\n"
