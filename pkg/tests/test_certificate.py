import math

import numpy as np
import pytest

from agechemostat.certificate import (MARGINAL, Certificate, ConditionReport, assemble_P, check_conditions,
                                      eigen_pd, evaluate_certificate, feasibility_threshold_scan,
                                      global_threshold, leading_minors, linearization_threshold,
                                      recipe_for, reduced_matrix, search_certificate, symmetric_eigenvalues,
                                      sylvester_pd, threshold_gap, tothkot_recipe, trigonometric_eigenvalues,
                                      weighted_norm)
from agechemostat.equilibrium import solve_equilibrium
from agechemostat.errors import CertificateError
from agechemostat.model import Constant, ExpDecay, tothkot_assumption_b, tothkot_model


@pytest.fixture(scope="module")
def recipe(recipe_eq, recipe_data):
    return tothkot_recipe(0.2, 1.0, 2.0, 2.0, recipe_eq, recipe_data)


def test_threshold_values():
    assert global_threshold(1.0, 2.0) == 0.125
    assert linearization_threshold(1.0, 2.0) == 0.0625
    assert global_threshold(2.0, 1.0) == 0.025
    assert linearization_threshold(2.0, 1.0) == 0.125
    assert global_threshold(1.0, 0.0) == linearization_threshold(1.0, 0.0) == 0.0


def test_recipe_feasible_and_infeasible(recipe):
    assert recipe.feasible and recipe.report.passed
    low = recipe_for(0.1, 1.0, 2.0, 2.0, n_age=401)
    assert not low.feasible
    assert "Gamma1" in low.message and low.Gamma1 >= low.Gamma_max


def test_recipe_constants(recipe):
    cert = recipe.certificate
    D, L = 0.2, 1.0
    assert cert.sigma == pytest.approx((D + L) / 2)
    assert cert.epsilon == pytest.approx(2.0 / (4 * cert.sigma * (cert.sigma + D + L)))
    assert (cert.lam, cert.omega, cert.R1, cert.R2, cert.R3) == (0.0, 1.0, 1.0, 1.0, 1.0)
    assert cert.F == pytest.approx(2 * 2.0 * 2.0)
    s = math.sqrt(2.0 / (L + D) + 1.0)
    assert cert.Gamma == pytest.approx(((s - 1) ** 2 + 4 * D / (L + D)) / 2, rel=1e-14)
    # the dissipation margin reduces to sigma/2 once epsilon is twice its lower bound
    assert recipe.report.dissipation_margin == pytest.approx(cert.sigma / 2, rel=1e-12)


def test_condition_margins_for_recipe(recipe, recipe_eq):
    rep = recipe.report
    assert rep.alpha_margin == 0.0 and rep.holds_alpha
    assert rep.growth_margin == pytest.approx(recipe_eq.kappa1 * rep.evaluation.g_lower)
    assert rep.weight_margin == 1.0
    doc = rep.to_dict()
    assert set(doc["conditions"]) == {"alpha", "growth", "dissipation", "weight", "matrix"}


def test_A_entry_without_residuals(recipe_eq, recipe_data, recipe):
    for lam in (0.0, 0.3, 1.0):
        cert = Certificate(**{**recipe.certificate.to_dict(), "lam": lam})
        ce = evaluate_certificate(recipe_eq, recipe_data, cert)
        expected = recipe_eq.kappa1 - cert.B * ce.g_in * (1 + cert.epsilon * recipe_eq.kappa1 ** 2)
        assert ce.A == pytest.approx(expected, rel=1e-14)


def test_small_B_limit_is_reduced_matrix(recipe_eq, recipe_data, recipe):
    cert = Certificate(**{**recipe.certificate.to_dict(), "B": 1e-300})
    P, _ = assemble_P(recipe_eq, recipe_data, cert)
    P0 = reduced_matrix(cert.Gamma, cert.M, 0.2, 1.0, 2.0)
    assert np.allclose(P, P0, rtol=1e-14, atol=0)


def test_threshold_gap_is_increasing_with_root_at_threshold():
    for L, k in ((1.0, 2.0), (2.0, 1.0), (1e-6, 1.0)):
        T = global_threshold(L, k)
        assert abs(threshold_gap(T, L, k)) <= 1e-10
        D = np.linspace(0.2 * T, 5 * T, 200)
        assert np.all(np.diff([threshold_gap(d, L, k) for d in D]) > 0)


def test_zero_fecundity_decay_is_always_feasible():
    res = recipe_for(0.01, 1.0, 0.0, 2.0, n_age=401)
    assert res.Gamma1 == 0.0 and res.feasible


def test_scan_columns():
    T = global_threshold(1.0, 2.0)
    rows = feasibility_threshold_scan(1.0, 2.0, 2.0, np.linspace(0.5 * T, 2 * T, 7), n_age=401)
    assert [r.recipe_feasible for r in rows] == [r.cond_global for r in rows]


def test_divergent_weighted_norm(recipe_model):
    with pytest.raises(CertificateError, match="increase sigma infeasible for this h"):
        weighted_norm([(1.0, ExpDecay(1.0, 0.3))], 0.5, recipe_model)
    # rate above sigma: int exp(2 sigma a) exp(-2 l a) = 1/(2 (l - sigma))
    assert weighted_norm([(1.0, ExpDecay(1.0, 0.8))], 0.5, recipe_model) == pytest.approx(math.sqrt(1 / 0.6))
    assert weighted_norm([(1.0, Constant(0.0))], 3.0, recipe_model) == 0.0


def test_F_must_exceed_RS_in(recipe_eq, recipe_data, recipe):
    cert = Certificate(**{**recipe.certificate.to_dict(), "F": 4.0})
    with pytest.raises(CertificateError):
        check_conditions(recipe_eq, recipe_data, cert)


def test_certificate_validation_and_round_trip(recipe):
    cert = recipe.certificate
    assert Certificate.from_dict(cert.to_dict()) == cert
    with pytest.raises(ValueError):
        Certificate(**{**cert.to_dict(), "lam": 1.5})
    with pytest.raises(ValueError):
        Certificate.from_dict({**cert.to_dict(), "extra": 1.0})


def test_eigenvalues_against_lapack(rng):
    for _ in range(200):
        X = rng.normal(size=(3, 3))
        P = X + X.T
        assert np.allclose(symmetric_eigenvalues(P), np.linalg.eigvalsh(P), rtol=0, atol=1e-13)
        assert np.allclose(trigonometric_eigenvalues(P), np.linalg.eigvalsh(P), rtol=0, atol=1e-9)


def test_eigenvalues_with_two_tiny_eigenvalues():
    # two eigenvalues near 1e-10 next to one of order 1: the closed form loses them, Jacobi does not
    Q, _ = np.linalg.qr(np.array([[1.0, 2.0, 0.5], [0.3, -1.0, 2.0], [2.0, 0.1, 1.0]]))
    P = Q @ np.diag([5e-10, 2e-9, 2.6]) @ Q.T
    lam = symmetric_eigenvalues(P)
    assert lam[0] == pytest.approx(5e-10, abs=1e-15)
    assert lam[1] == pytest.approx(2e-9, abs=1e-15)
    assert symmetric_eigenvalues(np.zeros((3, 3))) == (0.0, 0.0, 0.0)


def test_sylvester_and_eigen_agree_on_definite_examples():
    assert sylvester_pd(np.eye(3)) and eigen_pd(np.eye(3))
    P = np.diag([1.0, -1.0, 1.0])
    assert not sylvester_pd(P) and not eigen_pd(P)
    assert leading_minors(np.diag([2.0, 3.0, 4.0])) == (2.0, 6.0, 24.0)


def test_marginal_status(recipe):
    base = recipe.report
    tiny = ConditionReport(base.alpha_margin, base.growth_margin, base.dissipation_margin, base.weight_margin,
                           0.5 * MARGINAL, base.sylvester_minors, base.evaluation)
    assert tiny.pd_status == "marginal" and not tiny.passed


def test_search_finds_certificate_above_threshold(recipe_eq, recipe_data):
    res = search_certificate(recipe_eq, recipe_data, budget=2000, seed=0)
    assert res.found and res.report.passed
    again = search_certificate(recipe_eq, recipe_data, budget=2000, seed=0)
    assert again.certificate == res.certificate and again.evaluations == res.evaluations


@pytest.mark.slow
def test_search_fails_far_below_threshold():
    D = global_threshold(1.0, 2.0) / 10
    p = tothkot_model(2.0, 2.0, 1.0, D, 2.0, n_age=401)
    eq = solve_equilibrium(p)
    res = search_certificate(eq, tothkot_assumption_b(p, eq.theta), budget=2000, seed=0)
    assert not res.found and "non-conclusive" in res.label


def test_search_zero_budget(recipe_eq, recipe_data):
    res = search_certificate(recipe_eq, recipe_data, budget=0)
    assert not res.found and res.evaluations == 0
