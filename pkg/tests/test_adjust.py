import time

import numpy as np
import pytest
from scipy.optimize import brentq

from specdebias.adjust import (AdjustmentProblem, df_adjustment_elastic_net, df_adjustment_lasso,
                               df_adjustment_ridge, g_p, solve_adjustment)
from specdebias.errors import CertificateError, InvalidInputError
from specdebias.fit import fit
from specdebias.penalty import PenaltySpec, hpp_extended
from specdebias.spectral import decompose, sample_marchenko_pastur

from conftest import gaussian_instance


def ridge_adj_closed_form(d2, lam):
    return 1.0 / (1.0 / np.mean(lam * d2 / (d2 + lam)) - 1.0 / lam)


def test_constant_spectrum_g_is_one():
    prob = AdjustmentProblem(np.full(10, 2.0), np.linspace(0.1, 3, 10))
    assert g_p(prob, 2.0) == pytest.approx(1.0, abs=1e-15)


def test_all_infinite_hpp():
    prob = AdjustmentProblem(np.linspace(0.5, 2, 8), np.full(8, np.inf))
    for g in (0.1, 1.0, 7.0):
        assert g_p(prob, g) == 1.0
    with pytest.raises(CertificateError):
        solve_adjustment(prob)


def test_ridge_g_at_closed_form(rng):
    d2 = rng.gamma(1.5, 1.0, 200)
    lam = 0.3
    prob = AdjustmentProblem(d2, np.full(200, lam))
    assert g_p(prob, ridge_adj_closed_form(d2, lam)) == pytest.approx(1.0, abs=1e-10)


def test_ridge_root_matches_closed_form(rng):
    d2 = rng.gamma(1.5, 1.0, 200)
    adj = solve_adjustment(AdjustmentProblem(d2, np.full(200, 0.3)))
    assert adj == pytest.approx(ridge_adj_closed_form(d2, 0.3), rel=1e-8)
    assert 0 < adj <= d2.max()


def test_constant_spectrum_root():
    hpp = np.r_[np.full(30, 0.1), np.full(20, np.inf)]
    assert solve_adjustment(AdjustmentProblem(np.full(50, 1.7), hpp)) == pytest.approx(1.7, abs=1e-12)


def test_elastic_net_specialised_equation(rng):
    X, y, _ = gaussian_instance(rng, 150, 300)
    pen = PenaltySpec(1.0, 0.1)
    fr = fit(X, y, pen)
    spec = decompose(X)
    p, s = 300, fr.s_hat
    generic = solve_adjustment(AdjustmentProblem(spec.d2, hpp_extended(pen, fr.beta_hat)))

    def special(a):
        c = (s / p) / (1 + pen.lambda2 / a)
        return np.mean(1.0 / ((spec.d2 / a - 1.0) * c + 1.0)) - 1.0

    ref = brentq(special, 1e-6, spec.d2.max(), xtol=1e-15, rtol=1e-15)
    assert generic == pytest.approx(ref, rel=1e-10)


def test_g_strictly_increasing_and_brackets(rng):
    for _ in range(50):
        p = int(rng.integers(5, 60))
        d2 = np.sort(rng.gamma(1.0, 1.0, p))[::-1]
        hpp = np.where(rng.random(p) < 0.5, np.inf, rng.uniform(0.01, 2, p))
        hpp[0] = 0.5
        prob = AdjustmentProblem(d2, hpp)
        gs = np.sort(rng.uniform(1e-3, 2 * d2.max(), 20))
        vals = [g_p(prob, g) for g in gs]
        assert np.all(np.diff(vals) > 0)
        assert g_p(prob, 1e-8) < 1 < g_p(prob, d2.max() + 1)


def test_resolve_is_idempotent(rng):
    d2 = rng.gamma(2.0, 0.5, 100)
    prob = AdjustmentProblem(d2, np.where(rng.random(100) < 0.3, np.inf, 0.1))
    adj = solve_adjustment(prob)
    assert abs(g_p(prob, adj) - 1) <= 1e-10
    g, dg = prob.value_and_derivative(adj)
    # one Newton step from the root moves by less than the root tolerance
    assert abs((g - 1) / dg) <= 1e-10 * adj


def test_certificate_failure_reason():
    d2 = np.r_[np.ones(3), np.zeros(3)]
    hpp = np.r_[np.zeros(3), np.full(3, np.inf)]
    prob = AdjustmentProblem(d2, hpp)
    assert "nnz" in prob.certificate_failure()
    with pytest.raises(CertificateError):
        solve_adjustment(prob)
    with pytest.raises(InvalidInputError):
        AdjustmentProblem(np.ones(3), np.ones(4))


def test_df_ridge_examples():
    assert df_adjustment_ridge(np.zeros(5), 1.0, 5) == 1.0
    assert df_adjustment_ridge(np.ones(4), 1.0, 4) == pytest.approx(0.5)


def test_df_lasso_examples():
    assert df_adjustment_lasso(0, 10) == 1.0
    assert df_adjustment_lasso(5, 10) == 0.5
    with pytest.raises(InvalidInputError):
        df_adjustment_lasso(10, 10)


def test_df_elastic_net_reduces_to_lasso(rng):
    X = rng.standard_normal((30, 50))
    beta = np.zeros(50)
    beta[[1, 4, 9]] = 1.0
    assert df_adjustment_elastic_net(X, beta, 0.0) == pytest.approx(1 - 3 / 30)
    full = np.ones(50)
    s = np.linalg.svd(X, compute_uv=False) ** 2
    assert df_adjustment_elastic_net(X, full, 0.7) == pytest.approx(1 - np.sum(s / (s + 0.7)) / 30)


def test_ridge_sa_matches_df_under_mp():
    d2 = sample_marchenko_pastur(2.0, 100_000, rng=3)
    p = d2.size
    for lam in (0.3, 1.0, 3.0):
        sa = solve_adjustment(AdjustmentProblem(d2, np.full(p, lam)))
        assert sa == pytest.approx(df_adjustment_ridge(d2, lam, 2 * p), rel=0.02)


def test_hundred_ridge_spectra_fast():
    rng = np.random.default_rng(5)
    t0 = time.perf_counter()
    for _ in range(100):
        d2 = rng.gamma(rng.uniform(0.3, 3), 1.0, 200)
        lam = rng.uniform(0.01, 5)
        adj = solve_adjustment(AdjustmentProblem(d2, np.full(200, lam)))
        assert adj == pytest.approx(ridge_adj_closed_form(d2, lam), rel=1e-8)
    assert time.perf_counter() - t0 < 5
